#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adkit/config.hpp"
#include "adkit/data.hpp"
#include "adkit/fewshot.hpp"
#include "adkit/metrics.hpp"
#include "adkit/zeroshot.hpp"

namespace adkit {

enum class EvalMode { Zero, Few };

EvalMode eval_mode_from_string(const std::string& name);

struct SeedReport {
    uint64_t seed = 0;
    MetricReport report;
};

struct EvalResult {
    std::vector<SeedReport> per_seed;
    MetricReport mean;    // elementwise mean over seeds
    MetricReport stddev;  // elementwise population std over seeds
};

/// Reference images for one category: eval.k distinct draws from the
/// category's normal train pool, ordered by a partial shuffle of
/// hash(seed, category).
std::vector<int> draw_reference_indices(const DatasetManifest& manifest,
                                        const std::string& category, int k, uint64_t seed);

/// Called once per (category, seed) with the freshly built banks.
using BankSink =
    std::function<void(const std::string& category, uint64_t seed, const std::vector<MemoryBank>&)>;

/// Full evaluation over every category and seed. Zero mode: image score is
/// the abnormal softmax probability, map is the stage-summed text-similarity
/// map. Few mode: adds the memory-bank map and scores text probability +
/// fused-map max. Pixel metrics pool all pixels of a category at
/// eval.out_side; masks are nearest-resized.
EvalResult run_eval(const RunConfig& cfg, EvalMode mode, const Backbone& backbone,
                    const std::vector<ProjectionHead>& heads, const TextFeatureMatrix& ft,
                    const DatasetManifest& manifest, const BankSink& bank_sink = nullptr);

struct PredictOutput {
    AnomalyMap map;  // at eval.out_side, pre-display-normalization
    double image_score = 0.0;
    double map_max = 0.0;
    int input_h = 0;
    int input_w = 0;
};

/// Scores one image through the same code path as run_eval. banks may be
/// empty in zero mode.
PredictOutput run_predict(const RunConfig& cfg, EvalMode mode, const Backbone& backbone,
                          const std::vector<ProjectionHead>& heads, const TextFeatureMatrix& ft,
                          const std::vector<MemoryBank>& banks, const std::string& image_path);

/// Backbone features, going through the ADKIT_CACHE directory when that env
/// var is set. Cache keys cover the image file bytes and the backbone spec,
/// and cached features are bit-identical to recomputed ones.
BackboneOutput extract_with_cache(const Backbone& backbone, const std::string& image_path,
                                  const ImageTensor& preprocessed);

/// Builds the prompt ensemble and text features described by the config.
TextFeatureMatrix build_text_features(const PromptConfig& prompts, int joint_width);

}  // namespace adkit
