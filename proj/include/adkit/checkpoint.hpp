#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adkit/errors.hpp"

#include <json.hpp>

namespace adkit {

// Single-file tensor container shared by head checkpoints, memory banks and
// backbone weights:
//   bytes 0..4   magic "ADKH1"
//   bytes 5..8   uint32 LE, JSON header length in bytes
//   header       UTF-8 JSON: {"tensors":[{name,shape,dtype:"f32",offset},...],
//                             "meta":{...}}   (offset relative to data start)
//   data         raw little-endian f32 blobs

struct TensorInfo {
    std::string name;
    std::vector<int64_t> shape;
    uint64_t offset = 0;  // into the data section

    int64_t element_count() const;
};

class TensorFileWriter {
public:
    /// Queues a tensor; data is copied. Name must be unique.
    void add(const std::string& name, const std::vector<int64_t>& shape,
             const std::vector<float>& data);
    void set_meta(const nlohmann::json& meta) { meta_ = meta; }
    void write(const std::string& path) const;

private:
    std::vector<TensorInfo> infos_;
    std::vector<std::vector<float>> blobs_;
    nlohmann::json meta_;
};

class TensorFileReader {
public:
    /// Parses the header; throws MissingCheckpoint if the file does not exist
    /// and CheckpointParseError (with byte offset) on malformed contents.
    explicit TensorFileReader(const std::string& path);

    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const TensorInfo& info(const std::string& name) const;
    std::vector<std::string> names() const;
    const nlohmann::json& meta() const { return meta_; }

    /// Reads one tensor's data; shape is available via info().
    std::vector<float> read(const std::string& name) const;

private:
    std::string path_;
    std::vector<TensorInfo> infos_;
    std::map<std::string, size_t> index_;
    nlohmann::json meta_;
    uint64_t data_start_ = 0;
    uint64_t file_size_ = 0;
};

}  // namespace adkit
