#include "adkit/interp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adkit {

namespace {

struct AxisTap {
    int i0, i1;
    double w0, w1;
};

std::vector<AxisTap> axis_taps(int in_n, int out_n) {
    std::vector<AxisTap> taps(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int o = 0; o < out_n; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        double fl = std::floor(src);
        int i0 = static_cast<int>(fl);
        double f = src - fl;
        int i1 = i0 + 1;
        i0 = std::clamp(i0, 0, in_n - 1);
        i1 = std::clamp(i1, 0, in_n - 1);
        taps[o] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

}  // namespace

BilinearPlan::BilinearPlan(int in_h, int in_w, int out_h, int out_w)
    : in_h_(in_h), in_w_(in_w), out_h_(out_h), out_w_(out_w) {
    if (in_h <= 0 || in_w <= 0 || out_h <= 0 || out_w <= 0)
        throw std::invalid_argument("BilinearPlan: non-positive size");
    const auto rows = axis_taps(in_h, out_h);
    const auto cols = axis_taps(in_w, out_w);
    taps_.resize(static_cast<size_t>(out_h) * out_w);
    for (int r = 0; r < out_h; ++r) {
        const AxisTap& tr = rows[r];
        for (int c = 0; c < out_w; ++c) {
            const AxisTap& tc = cols[c];
            InterpTap& t = taps_[static_cast<size_t>(r) * out_w + c];
            t.src0 = tr.i0 * in_w + tc.i0;
            t.src1 = tr.i0 * in_w + tc.i1;
            t.src2 = tr.i1 * in_w + tc.i0;
            t.src3 = tr.i1 * in_w + tc.i1;
            t.w0 = tr.w0 * tc.w0;
            t.w1 = tr.w0 * tc.w1;
            t.w2 = tr.w1 * tc.w0;
            t.w3 = tr.w1 * tc.w1;
        }
    }
}

void BilinearPlan::apply(const double* src, double* dst) const {
    for (size_t i = 0; i < taps_.size(); ++i) {
        const InterpTap& t = taps_[i];
        dst[i] = t.w0 * src[t.src0] + t.w1 * src[t.src1] + t.w2 * src[t.src2] +
                 t.w3 * src[t.src3];
    }
}

void BilinearPlan::apply_adjoint(const double* dst_grad, double* src_grad) const {
    for (size_t i = 0; i < taps_.size(); ++i) {
        const InterpTap& t = taps_[i];
        const double g = dst_grad[i];
        src_grad[t.src0] += t.w0 * g;
        src_grad[t.src1] += t.w1 * g;
        src_grad[t.src2] += t.w2 * g;
        src_grad[t.src3] += t.w3 * g;
    }
}

namespace {

// cubic convolution kernel, a = -0.75 (same family OpenCV/torch use)
double cubic_weight(double x) {
    constexpr double a = -0.75;
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

}  // namespace

std::vector<float> bicubic_resize_grid(const std::vector<float>& src, int g_in, int g_out,
                                       int dim) {
    if (g_in <= 0 || g_out <= 0 || dim <= 0)
        throw std::invalid_argument("bicubic_resize_grid: non-positive size");
    if (src.size() != static_cast<size_t>(g_in) * g_in * dim)
        throw std::invalid_argument("bicubic_resize_grid: src size mismatch");
    if (g_in == g_out) return src;

    const double scale = static_cast<double>(g_in) / g_out;
    std::vector<float> dst(static_cast<size_t>(g_out) * g_out * dim, 0.0f);

    // per-axis 4-tap weights
    struct CubicTap {
        int idx[4];
        double w[4];
    };
    std::vector<CubicTap> taps(g_out);
    for (int o = 0; o < g_out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        int base = static_cast<int>(std::floor(s));
        double f = s - base;
        for (int k = 0; k < 4; ++k) {
            taps[o].idx[k] = std::clamp(base - 1 + k, 0, g_in - 1);
            taps[o].w[k] = cubic_weight(f - (k - 1));
        }
    }

    std::vector<double> acc(dim);
    for (int r = 0; r < g_out; ++r) {
        for (int c = 0; c < g_out; ++c) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int kr = 0; kr < 4; ++kr) {
                for (int kc = 0; kc < 4; ++kc) {
                    const double w = taps[r].w[kr] * taps[c].w[kc];
                    const float* s =
                        src.data() +
                        (static_cast<size_t>(taps[r].idx[kr]) * g_in + taps[c].idx[kc]) * dim;
                    for (int d = 0; d < dim; ++d) acc[d] += w * s[d];
                }
            }
            float* out = dst.data() + (static_cast<size_t>(r) * g_out + c) * dim;
            for (int d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d]);
        }
    }
    return dst;
}

}  // namespace adkit
