#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace adkit {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// RGB image, values in [0,1], row-major H x W x 3.
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // h*w*3, interleaved RGB
    std::string category;

    float* px(int r, int c) { return pixels.data() + (static_cast<size_t>(r) * width + c) * 3; }
    const float* px(int r, int c) const {
        return pixels.data() + (static_cast<size_t>(r) * width + c) * 3;
    }
};

/// L2-normalized image embedding in the joint space (length C).
struct ClassEmbedding {
    Eigen::VectorXf v;
};

/// Raw patch-token features of one encoder stage, (h*w) x C_s row-major,
/// row index = r * w + c. Not projected, not normalized.
struct PatchFeatureGrid {
    int stage = 0;  // 1-based stage index
    int h = 0;
    int w = 0;
    RowMatrixF feat;
};

/// Per-pixel anomaly scores. Values are non-negative; per-stage pre-sum maps
/// carry abnormal-probability mass in [0,1], stage sums lie in [0, num_stages].
struct AnomalyMap {
    enum class Resolution { PatchGrid, Image };

    int h = 0;
    int w = 0;
    std::vector<double> v;  // row-major h*w
    Resolution res = Resolution::Image;

    AnomalyMap() = default;
    AnomalyMap(int h_, int w_, Resolution r = Resolution::Image)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0), res(r) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
    double max_value() const;
};

/// Binary ground-truth mask, row-major h*w, values 0/1.
struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> v;

    BinaryMask() = default;
    BinaryMask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

    uint8_t& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
    uint8_t at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
    bool any() const;
};

}  // namespace adkit
