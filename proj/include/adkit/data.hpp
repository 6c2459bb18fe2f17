#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adkit/rng.hpp"
#include "adkit/types.hpp"

namespace adkit {

enum class DatasetLayout { Auto, Mvtec, Visa };

DatasetLayout layout_from_string(const std::string& name);
std::string layout_to_string(DatasetLayout layout);

struct SampleRecord {
    std::string category;
    std::string split;        // "train" or "test"
    std::string defect_type;  // "good" for normal samples
    std::string image_path;
    std::string mask_path;  // empty for normal samples (implicit all-zero mask)
    int label = 0;          // 0 iff defect_type == "good"
};

struct DatasetManifest {
    std::string root;
    DatasetLayout layout = DatasetLayout::Mvtec;
    std::vector<std::string> categories;
    std::vector<SampleRecord> samples;

    std::vector<int> indices(const std::string& category, const std::string& split) const;
};

/// Walks an MVTec-style tree (`cat/{train,test}/<defect>/*.png` with masks
/// under `cat/ground_truth/<defect>/<stem>_mask.png`) or a VisA-style
/// `split_csv/1cls.csv` listing. Layout::Auto probes for the CSV. Ordering is
/// lexicographic; anomalous test samples without masks abort with the full
/// list of offending paths.
DatasetManifest scan_dataset(const std::string& root, DatasetLayout layout = DatasetLayout::Auto);

/// RGB float in [0,1] at native resolution.
ImageTensor load_image(const std::string& path);

/// Grayscale mask binarized at 128; native resolution.
BinaryMask load_mask_file(const std::string& path);

/// Sample's mask nearest-resized to h x w; records without a mask get zeros.
BinaryMask mask_for_sample(const SampleRecord& record, int h, int w);

struct TrainSample {
    ImageTensor image;
    BinaryMask mask;
    int label = 0;
    std::string category;
};

/// With probability p, tiles the four same-category inputs 2x2 (index = 2*row
/// + col) and resizes the composite back to out_side (mask nearest-neighbor);
/// otherwise returns the first sample unchanged. Label is the OR of all four.
TrainSample mosaic_augment(const std::vector<TrainSample>& four, double p, Rng& rng, int out_side);

/// Seeded shuffle of [0, n) chunked into batches; the final partial batch is
/// kept.
std::vector<std::vector<int>> make_batches(int n, int batch_size, uint64_t seed);

}  // namespace adkit
