#pragma once

#include <string>

#include "adkit/config.hpp"
#include "adkit/pipeline.hpp"

namespace adkit {

/// <output.dir>/<run_name>, or run-<UTC timestamp> when run_name is empty.
/// Creates the directory.
std::string resolve_run_dir(const OutputConfig& out);

/// Fits the projection heads and writes heads.adkh, train_log.jsonl and the
/// resolved config.json into the run directory. Returns the run directory.
std::string cmd_train(const RunConfig& cfg);

/// Evaluates every seed and writes report_seed<seed>.{json,csv},
/// report_mean.*, report_std.* and, in few mode, banks/<category>.adkh for
/// the first seed. Returns the run directory.
std::string cmd_eval(const RunConfig& cfg, EvalMode mode);

/// Writes <stem>_overlay.png (input-sized heatmap blend, display-only
/// normalization) and <stem>_score.json. Returns the run directory.
std::string cmd_predict(const RunConfig& cfg, EvalMode mode, const std::string& image_path);

}  // namespace adkit
