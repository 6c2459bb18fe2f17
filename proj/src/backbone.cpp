#include "adkit/backbone.hpp"

#include <stdexcept>

#include "adkit/rng.hpp"

namespace adkit {

void BackboneSpec::validate() const {
    if (name != "vit" && name != "synthetic")
        throw std::invalid_argument("backbone: unknown name '" + name + "'");
    if (num_layers <= 0) throw std::invalid_argument("backbone: num_layers must be positive");
    if (stage_boundaries.empty())
        throw std::invalid_argument("backbone: stage_boundaries must be non-empty");
    int prev = 0;
    for (int b : stage_boundaries) {
        if (b <= prev)
            throw std::invalid_argument("backbone: stage_boundaries must be strictly increasing");
        prev = b;
    }
    if (stage_boundaries.back() != num_layers)
        throw std::invalid_argument("backbone: last stage boundary must equal num_layers");
    if (patch_size <= 0 || input_side <= 0 || internal_width <= 0 || joint_width <= 0)
        throw std::invalid_argument("backbone: sizes must be positive");
    if (input_side % patch_size != 0)
        throw std::invalid_argument("backbone: input_side must be a multiple of patch_size");
    if (num_heads <= 0 || internal_width % num_heads != 0)
        throw std::invalid_argument("backbone: num_heads must divide internal_width");
    if (gelu != "quick" && gelu != "exact")
        throw std::invalid_argument("backbone: gelu must be 'quick' or 'exact'");
}

Backbone::Backbone(BackboneSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void Backbone::check_input(const ImageTensor& image) const {
    if (image.height != spec_.input_side || image.width != spec_.input_side)
        throw std::invalid_argument(
            "backbone: image must be preprocessed to " + std::to_string(spec_.input_side) +
            "x" + std::to_string(spec_.input_side) + ", got " + std::to_string(image.height) +
            "x" + std::to_string(image.width));
    if (image.pixels.size() != static_cast<size_t>(image.height) * image.width * 3)
        throw std::invalid_argument("backbone: pixel buffer size mismatch");
}

// ---------------------------------------------------------------------------
// SyntheticBackbone
// ---------------------------------------------------------------------------

SyntheticBackbone::SyntheticBackbone(BackboneSpec spec) : Backbone(std::move(spec)) {}

namespace {

uint64_t hash_patch(const ImageTensor& image, int pr, int pc, int patch) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int r = 0; r < patch; ++r) {
        const float* row = image.px(pr * patch + r, pc * patch);
        h = fnv1a64(row, static_cast<size_t>(patch) * 3 * sizeof(float), h);
    }
    return h;
}

void fill_uniform(Rng& rng, float* out, int n) {
    for (int i = 0; i < n; ++i) out[i] = static_cast<float>(2.0 * rng.next_double() - 1.0);
}

}  // namespace

BackboneOutput SyntheticBackbone::extract(const ImageTensor& image) const {
    check_input(image);
    const int g = spec_.grid_side();
    const int cs = spec_.internal_width;

    BackboneOutput out;
    out.grids.reserve(spec_.num_stages());

    // content hash per patch, shared across stages
    std::vector<uint64_t> patch_hash(static_cast<size_t>(g) * g);
    for (int pr = 0; pr < g; ++pr)
        for (int pc = 0; pc < g; ++pc)
            patch_hash[static_cast<size_t>(pr) * g + pc] =
                hash_patch(image, pr, pc, spec_.patch_size);

    for (int s = 0; s < spec_.num_stages(); ++s) {
        PatchFeatureGrid grid;
        grid.stage = s + 1;
        grid.h = g;
        grid.w = g;
        grid.feat.resize(static_cast<Eigen::Index>(g) * g, cs);
        for (int p = 0; p < g * g; ++p) {
            uint64_t h = hash_combine(patch_hash[p], spec_.seed);
            h = hash_combine(h, static_cast<uint64_t>(s + 1));
            Rng rng(h);
            fill_uniform(rng, grid.feat.row(p).data(), cs);
        }
        out.grids.push_back(std::move(grid));
    }

    uint64_t img_hash = fnv1a64(image.pixels.data(), image.pixels.size() * sizeof(float));
    Rng rng(hash_combine(img_hash, spec_.seed));
    Eigen::VectorXf v(spec_.joint_width);
    for (int i = 0; i < spec_.joint_width; ++i)
        v[i] = static_cast<float>(rng.next_gaussian());
    out.cls.v = v / v.norm();
    return out;
}

std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec) {
    spec.validate();
    if (spec.name == "synthetic") return std::make_unique<SyntheticBackbone>(spec);
    return std::make_unique<VitBackbone>(spec);
}

}  // namespace adkit
