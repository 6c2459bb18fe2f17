#include "adkit/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adkit/interp.hpp"

namespace adkit {

ImageTensor resize_image(const ImageTensor& src, int out_h, int out_w) {
    if (src.height == out_h && src.width == out_w) return src;
    BilinearPlan plan(src.height, src.width, out_h, out_w);
    const size_t in_n = static_cast<size_t>(src.height) * src.width;
    const size_t out_n = static_cast<size_t>(out_h) * out_w;

    ImageTensor dst;
    dst.height = out_h;
    dst.width = out_w;
    dst.category = src.category;
    dst.pixels.resize(out_n * 3);

    std::vector<double> chan_in(in_n), chan_out(out_n);
    for (int ch = 0; ch < 3; ++ch) {
        for (size_t i = 0; i < in_n; ++i) chan_in[i] = src.pixels[i * 3 + ch];
        plan.apply(chan_in.data(), chan_out.data());
        for (size_t i = 0; i < out_n; ++i)
            dst.pixels[i * 3 + ch] = static_cast<float>(std::clamp(chan_out[i], 0.0, 1.0));
    }
    return dst;
}

BinaryMask resize_mask(const BinaryMask& src, int out_h, int out_w) {
    if (src.h == out_h && src.w == out_w) return src;
    BinaryMask dst(out_h, out_w);
    const double sr = static_cast<double>(src.h) / out_h;
    const double sc = static_cast<double>(src.w) / out_w;
    for (int r = 0; r < out_h; ++r) {
        const int ir = std::clamp(static_cast<int>(std::floor((r + 0.5) * sr)), 0, src.h - 1);
        for (int c = 0; c < out_w; ++c) {
            const int ic =
                std::clamp(static_cast<int>(std::floor((c + 0.5) * sc)), 0, src.w - 1);
            dst.at(r, c) = src.at(ir, ic);
        }
    }
    return dst;
}

ImageTensor center_crop(const ImageTensor& src, int side) {
    if (src.height < side || src.width < side)
        throw std::invalid_argument("center_crop: image smaller than crop side");
    if (src.height == side && src.width == side) return src;
    const int r0 = (src.height - side) / 2;
    const int c0 = (src.width - side) / 2;
    ImageTensor dst;
    dst.height = side;
    dst.width = side;
    dst.category = src.category;
    dst.pixels.resize(static_cast<size_t>(side) * side * 3);
    for (int r = 0; r < side; ++r)
        std::copy_n(src.px(r0 + r, c0), static_cast<size_t>(side) * 3, dst.px(r, 0));
    return dst;
}

ImageTensor preprocess_image(const ImageTensor& src, const BackboneSpec& spec) {
    if (src.height <= 0 || src.width <= 0)
        throw std::invalid_argument("preprocess_image: empty image");
    const int side = spec.input_side;
    int rh, rw;
    if (src.height <= src.width) {
        rh = side;
        rw = std::max(side, static_cast<int>(std::lround(
                                static_cast<double>(src.width) * side / src.height)));
    } else {
        rw = side;
        rh = std::max(side, static_cast<int>(std::lround(
                                static_cast<double>(src.height) * side / src.width)));
    }
    return center_crop(resize_image(src, rh, rw), side);
}

}  // namespace adkit
