#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "adkit/types.hpp"

namespace adkit {

/// Static description of the feature extractor. The default matches a CLIP
/// ViT-L/14 run at resolution 518 with its 24 layers split into 4 stages.
struct BackboneSpec {
    std::string name = "vit";  // "vit" or "synthetic"
    int num_layers = 24;
    std::vector<int> stage_boundaries = {6, 12, 18, 24};  // 1-based, last == num_layers
    int patch_size = 14;
    int internal_width = 1024;  // C_s, patch token width
    int joint_width = 768;      // C, joint embedding width
    int input_side = 518;
    int num_heads = 16;
    std::string gelu = "quick";  // "quick" (x*sigmoid(1.702x)) or "exact"
    std::array<float, 3> norm_mean = {0.48145466f, 0.4578275f, 0.40821073f};
    std::array<float, 3> norm_std = {0.26862954f, 0.26130258f, 0.27577711f};
    std::string weights;  // checkpoint path, vit only
    uint64_t seed = 0;    // synthetic feature stream

    int grid_side() const { return input_side / patch_size; }
    int num_stages() const { return static_cast<int>(stage_boundaries.size()); }
    /// Throws std::invalid_argument on inconsistent fields.
    void validate() const;
};

struct BackboneOutput {
    ClassEmbedding cls;  // unit L2 norm
    std::vector<PatchFeatureGrid> grids;  // one per stage, raw and unnormalized
};

class Backbone {
public:
    virtual ~Backbone() = default;
    const BackboneSpec& spec() const { return spec_; }

    /// Image must already be preprocessed to spec.input_side x spec.input_side.
    virtual BackboneOutput extract(const ImageTensor& image) const = 0;

protected:
    explicit Backbone(BackboneSpec spec);
    void check_input(const ImageTensor& image) const;
    BackboneSpec spec_;
};

/// Deterministic test backbone: every patch feature is a pseudo-random vector
/// seeded by hashing the patch's pixel content together with (seed, stage), so
/// identical image regions always produce identical features and memory banks
/// built from an image match it exactly.
class SyntheticBackbone : public Backbone {
public:
    explicit SyntheticBackbone(BackboneSpec spec);
    BackboneOutput extract(const ImageTensor& image) const override;
};

/// CLIP-style pre-LN vision transformer loaded from an ADKH1 checkpoint.
/// Stage outputs are the post-block residual-stream patch tokens; only the
/// class token passes through ln_post and the text-image projection.
/// Positional embeddings are adapted to the runtime grid by bicubic
/// interpolation when the checkpoint was trained at another resolution.
class VitBackbone : public Backbone {
public:
    explicit VitBackbone(BackboneSpec spec);
    ~VitBackbone() override;
    BackboneOutput extract(const ImageTensor& image) const override;

private:
    struct Weights;
    std::unique_ptr<Weights> w_;
};

/// Dispatches on spec.name.
std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec);

}  // namespace adkit
