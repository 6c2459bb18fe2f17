#pragma once

#include <string>
#include <vector>

#include "adkit/data.hpp"
#include "adkit/zeroshot.hpp"

namespace adkit {

struct EpochStats {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    int batches = 0;
};

struct TrainResult {
    std::vector<ProjectionHead> heads;
    std::vector<EpochStats> epochs;
};

/// Adam (beta 0.9/0.999, eps 1e-8, bias-corrected) on the projection heads.
/// Each sample: load, fit to the backbone side, optional mosaic with three
/// same-category companions, extract, focal+dice against the mask at
/// cfg.image_side. Deterministic for a fixed cfg.seed. epochs == 0 returns the
/// initialization untouched.
TrainResult train_heads(const DatasetManifest& manifest, const std::string& split,
                        const Backbone& backbone, const TextFeatureMatrix& ft,
                        const TrainConfig& cfg);

/// One JSON object per line: {"epoch":1,"mean_loss":...,"batches":...}.
void write_loss_log(const std::string& path, const std::vector<EpochStats>& epochs);

}  // namespace adkit
