#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adkit/backbone.hpp"
#include "adkit/metrics.hpp"
#include "adkit/prompts.hpp"
#include "adkit/rng.hpp"
#include "adkit/types.hpp"

namespace fixtures {

/// 4-stage synthetic backbone small enough for sub-second tests:
/// 28x28 input, patch 7 (4x4 grid), C_s=32, C=24.
adkit::BackboneSpec tiny_spec();

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct MvtecFixtureOptions {
    int categories = 1;
    int train_good = 6;
    int test_good = 4;
    int test_defect = 4;
    int image_side = 28;
    int patch = 7;  // defect rectangles snap to this grid
    uint64_t seed = 5;
};

/// Writes an MVTec-style tree of flat-color PNGs. Defects are differently
/// colored rectangles aligned to the patch grid, with matching ground-truth
/// masks, so the synthetic backbone sees exactly two feature clusters per
/// category.
void make_mvtec_fixture(const std::string& root, const MvtecFixtureOptions& opt);

/// Random scores with a controllable tie rate; guarantees both classes.
adkit::LabeledScores random_scores(adkit::Rng& rng, int n, double tie_prob);

/// Uniform [0,1) image of the given side, category "cat0".
adkit::ImageTensor random_image(adkit::Rng& rng, int side);

/// Random patch grid for one stage.
adkit::PatchFeatureGrid random_grid(adkit::Rng& rng, int stage, int h, int w, int dim);

/// Random unit-row 2 x width text matrix.
adkit::TextFeatureMatrix random_text(adkit::Rng& rng, int width);

}  // namespace fixtures
