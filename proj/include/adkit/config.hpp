#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adkit/backbone.hpp"
#include "adkit/zeroshot.hpp"

#include <json.hpp>

namespace adkit {

struct PromptConfig {
    std::string templates_path;        // empty -> built-in template set
    std::string normal_states_path;    // empty -> built-in states
    std::string abnormal_states_path;  // empty -> built-in states
    std::string object_name = "object";
    std::string encoder = "synthetic";  // "synthetic" or "precomputed"
    std::string embeddings_path;        // sentence-keyed ADKH1, precomputed only
    uint64_t seed = 1;                  // synthetic encoder stream
};

struct DataConfig {
    std::string train_root;
    std::string eval_root;
    std::string layout = "auto";  // auto | mvtec | visa
    std::string train_split = "test";  // heads are fit on the auxiliary set's test split
};

struct EvalConfig {
    int k = 0;  // reference shots per category; 0 = zero-shot
    std::vector<uint64_t> seeds = {0};
    int out_side = 518;  // resolution for pixel metrics and emitted maps
    double pro_fpr_limit = 0.3;
    bool normalize_fusion = false;  // min-max each map before fusing
    std::string checkpoint;         // heads.adkh produced by train
    std::string banks;              // memory-bank file, predict in few mode only
};

struct OutputConfig {
    std::string dir = "out";
    std::string run_name;  // empty -> run-<timestamp>
};

struct RunConfig {
    BackboneSpec backbone;
    PromptConfig prompts;
    TrainConfig train;
    DataConfig data;
    EvalConfig eval;
    OutputConfig output;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// "section.key=value" with JSON-typed values ("eval.k=4",
/// "eval.seeds=[1,2]", "data.layout=visa"); unparseable values are strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Reads the file, applies --set overrides in order, parses strictly.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace adkit
