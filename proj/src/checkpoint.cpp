#include "adkit/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace adkit {

namespace {

constexpr char kMagic[5] = {'A', 'D', 'K', 'H', '1'};
constexpr size_t kHeaderStart = sizeof(kMagic) + sizeof(uint32_t);

void write_u32_le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(const unsigned char* b) {
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

int64_t TensorInfo::element_count() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

void TensorFileWriter::add(const std::string& name, const std::vector<int64_t>& shape,
                           const std::vector<float>& data) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor '" + name + "': non-positive dim");
        n *= d;
    }
    if (static_cast<size_t>(n) != data.size())
        throw std::invalid_argument("tensor '" + name + "': shape/data size mismatch");
    for (const auto& t : infos_)
        if (t.name == name) throw std::invalid_argument("duplicate tensor name '" + name + "'");
    TensorInfo info;
    info.name = name;
    info.shape = shape;
    infos_.push_back(std::move(info));
    blobs_.push_back(data);
}

void TensorFileWriter::write(const std::string& path) const {
    nlohmann::json header;
    header["tensors"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (size_t i = 0; i < infos_.size(); ++i) {
        nlohmann::json t;
        t["name"] = infos_[i].name;
        t["shape"] = infos_[i].shape;
        t["dtype"] = "f32";
        t["offset"] = offset;
        header["tensors"].push_back(std::move(t));
        offset += blobs_[i].size() * sizeof(float);
    }
    if (!meta_.is_null()) header["meta"] = meta_;
    const std::string json = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32_le(out, static_cast<uint32_t>(json.size()));
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
    for (const auto& blob : blobs_)
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

TensorFileReader::TensorFileReader(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path)) throw MissingCheckpoint("checkpoint not found: " + path);
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw MissingCheckpoint("cannot open checkpoint: " + path);
    file_size_ = static_cast<uint64_t>(in.tellg());
    in.seekg(0);

    unsigned char head[kHeaderStart];
    if (file_size_ < kHeaderStart || !in.read(reinterpret_cast<char*>(head), kHeaderStart))
        throw CheckpointParseError("file too short for ADKH1 header", 0);
    if (std::memcmp(head, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointParseError("bad magic, expected ADKH1", 0);

    const uint32_t json_len = read_u32_le(head + sizeof(kMagic));
    if (kHeaderStart + json_len > file_size_)
        throw CheckpointParseError("truncated JSON header", sizeof(kMagic));

    std::string json(json_len, '\0');
    if (!in.read(json.data(), json_len))
        throw CheckpointParseError("failed reading JSON header", kHeaderStart);

    nlohmann::json header = nlohmann::json::parse(json, nullptr, false);
    if (header.is_discarded())
        throw CheckpointParseError("JSON header does not parse", kHeaderStart);
    if (!header.contains("tensors") || !header["tensors"].is_array())
        throw CheckpointParseError("header lacks 'tensors' array", kHeaderStart);
    if (header.contains("meta")) meta_ = header["meta"];

    data_start_ = kHeaderStart + json_len;
    const uint64_t data_size = file_size_ - data_start_;
    for (const auto& t : header["tensors"]) {
        TensorInfo info;
        if (!t.contains("name") || !t["name"].is_string() || !t.contains("shape") ||
            !t.contains("offset") || !t.contains("dtype"))
            throw CheckpointParseError("tensor record missing fields", kHeaderStart);
        if (t["dtype"].get<std::string>() != "f32")
            throw CheckpointParseError("unsupported dtype for '" + t["name"].get<std::string>() +
                                           "'",
                                       kHeaderStart);
        info.name = t["name"].get<std::string>();
        info.shape = t["shape"].get<std::vector<int64_t>>();
        info.offset = t["offset"].get<uint64_t>();
        for (int64_t d : info.shape)
            if (d <= 0)
                throw CheckpointParseError("non-positive dim in tensor '" + info.name + "'",
                                           kHeaderStart);
        const uint64_t bytes = static_cast<uint64_t>(info.element_count()) * sizeof(float);
        if (info.offset + bytes > data_size)
            throw CheckpointParseError("tensor '" + info.name + "' extends past end of file",
                                       data_start_ + info.offset);
        if (index_.count(info.name))
            throw CheckpointParseError("duplicate tensor '" + info.name + "'", kHeaderStart);
        index_[info.name] = infos_.size();
        infos_.push_back(std::move(info));
    }
}

const TensorInfo& TensorFileReader::info(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("tensor '" + name + "' not present in " + path_);
    return infos_[it->second];
}

std::vector<std::string> TensorFileReader::names() const {
    std::vector<std::string> out;
    out.reserve(infos_.size());
    for (const auto& t : infos_) out.push_back(t.name);
    return out;
}

std::vector<float> TensorFileReader::read(const std::string& name) const {
    const TensorInfo& t = info(name);
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw MissingCheckpoint("cannot open checkpoint: " + path_);
    std::vector<float> data(static_cast<size_t>(t.element_count()));
    in.seekg(static_cast<std::streamoff>(data_start_ + t.offset));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float))))
        throw CheckpointParseError("short read for tensor '" + name + "'",
                                   data_start_ + t.offset);
    return data;
}

}  // namespace adkit
