#pragma once

#include "adkit/backbone.hpp"
#include "adkit/types.hpp"

namespace adkit {

/// Bilinear resize (half-pixel centers), channels handled independently.
ImageTensor resize_image(const ImageTensor& src, int out_h, int out_w);

/// Nearest-neighbor mask resize; output stays binary.
BinaryMask resize_mask(const BinaryMask& src, int out_h, int out_w);

ImageTensor center_crop(const ImageTensor& src, int side);

/// Resize shorter side to spec.input_side, then center-crop. Values stay in
/// [0,1]; the model's channel normalization is applied inside the backbone.
ImageTensor preprocess_image(const ImageTensor& src, const BackboneSpec& spec);

}  // namespace adkit
