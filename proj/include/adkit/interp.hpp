#pragma once

#include <vector>

namespace adkit {

/// One output pixel as a sparse combination of input pixels.
struct InterpTap {
    int src0 = 0;   // flattened input indices
    int src1 = 0;
    int src2 = 0;
    int src3 = 0;
    double w0 = 0, w1 = 0, w2 = 0, w3 = 0;
};

/// Bilinear resize plan with half-pixel centers (src = (dst + 0.5) * scale - 0.5,
/// taps clamped to edges). Identity when sizes match. The plan is a linear map,
/// so its transpose gives the exact adjoint used during backprop.
class BilinearPlan {
public:
    BilinearPlan(int in_h, int in_w, int out_h, int out_w);

    int in_h() const { return in_h_; }
    int in_w() const { return in_w_; }
    int out_h() const { return out_h_; }
    int out_w() const { return out_w_; }

    /// dst[out_h*out_w] = plan * src[in_h*in_w]
    void apply(const double* src, double* dst) const;
    /// src_grad[in_h*in_w] += plan^T * dst_grad[out_h*out_w]
    void apply_adjoint(const double* dst_grad, double* src_grad) const;

private:
    int in_h_, in_w_, out_h_, out_w_;
    std::vector<InterpTap> taps_;  // one per output pixel, row-major
};

/// Bicubic resampling of a square g_in x g_in grid of vectors (dim channels,
/// channel-major input laid out as grid row-major with contiguous channels) to
/// g_out x g_out. Catmull-Rom style kernel (a = -0.75), half-pixel centers,
/// edge-clamped. Used to adapt pretrained positional embeddings to a new
/// patch-grid size.
std::vector<float> bicubic_resize_grid(const std::vector<float>& src, int g_in, int g_out,
                                       int dim);

}  // namespace adkit
