#include "adkit/config.hpp"

#include <fstream>
#include <set>

#include "adkit/data.hpp"
#include "adkit/errors.hpp"

namespace adkit {

namespace {

void check_keys(const nlohmann::json& j, const std::string& section,
                const std::set<std::string>& known) {
    if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw ConfigError("unknown config key '" + section + "." + item.key() + "'");
}

template <typename T>
void fetch(const nlohmann::json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + section + "." + key + "': " + e.what());
    }
}

void parse_backbone(const nlohmann::json& j, BackboneSpec& spec) {
    check_keys(j, "backbone",
               {"name", "num_layers", "stage_boundaries", "patch_size", "internal_width",
                "joint_width", "input_side", "num_heads", "gelu", "norm_mean", "norm_std",
                "weights", "seed"});
    fetch(j, "backbone", "name", spec.name);
    fetch(j, "backbone", "num_layers", spec.num_layers);
    fetch(j, "backbone", "stage_boundaries", spec.stage_boundaries);
    fetch(j, "backbone", "patch_size", spec.patch_size);
    fetch(j, "backbone", "internal_width", spec.internal_width);
    fetch(j, "backbone", "joint_width", spec.joint_width);
    fetch(j, "backbone", "input_side", spec.input_side);
    fetch(j, "backbone", "num_heads", spec.num_heads);
    fetch(j, "backbone", "gelu", spec.gelu);
    fetch(j, "backbone", "norm_mean", spec.norm_mean);
    fetch(j, "backbone", "norm_std", spec.norm_std);
    fetch(j, "backbone", "weights", spec.weights);
    fetch(j, "backbone", "seed", spec.seed);
}

void parse_prompts(const nlohmann::json& j, PromptConfig& p) {
    check_keys(j, "prompts",
               {"templates_path", "normal_states_path", "abnormal_states_path", "object_name",
                "encoder", "embeddings_path", "seed"});
    fetch(j, "prompts", "templates_path", p.templates_path);
    fetch(j, "prompts", "normal_states_path", p.normal_states_path);
    fetch(j, "prompts", "abnormal_states_path", p.abnormal_states_path);
    fetch(j, "prompts", "object_name", p.object_name);
    fetch(j, "prompts", "encoder", p.encoder);
    fetch(j, "prompts", "embeddings_path", p.embeddings_path);
    fetch(j, "prompts", "seed", p.seed);
}

void parse_train(const nlohmann::json& j, TrainConfig& t) {
    check_keys(j, "train",
               {"epochs", "batch_size", "learning_rate", "image_side", "mosaic_prob",
                "focal_gamma", "focal_alpha", "dice_smooth", "focal_weight", "dice_weight",
                "temperature", "seed"});
    fetch(j, "train", "epochs", t.epochs);
    fetch(j, "train", "batch_size", t.batch_size);
    fetch(j, "train", "learning_rate", t.learning_rate);
    fetch(j, "train", "image_side", t.image_side);
    fetch(j, "train", "mosaic_prob", t.mosaic_prob);
    fetch(j, "train", "focal_gamma", t.focal_gamma);
    fetch(j, "train", "focal_alpha", t.focal_alpha);
    fetch(j, "train", "dice_smooth", t.dice_smooth);
    fetch(j, "train", "focal_weight", t.focal_weight);
    fetch(j, "train", "dice_weight", t.dice_weight);
    fetch(j, "train", "temperature", t.temperature);
    fetch(j, "train", "seed", t.seed);
}

void parse_data(const nlohmann::json& j, DataConfig& d) {
    check_keys(j, "data", {"train_root", "eval_root", "layout", "train_split"});
    fetch(j, "data", "train_root", d.train_root);
    fetch(j, "data", "eval_root", d.eval_root);
    fetch(j, "data", "layout", d.layout);
    fetch(j, "data", "train_split", d.train_split);
}

void parse_eval(const nlohmann::json& j, EvalConfig& e) {
    check_keys(j, "eval",
               {"k", "seeds", "out_side", "pro_fpr_limit", "normalize_fusion", "checkpoint",
                "banks"});
    fetch(j, "eval", "k", e.k);
    fetch(j, "eval", "seeds", e.seeds);
    fetch(j, "eval", "out_side", e.out_side);
    fetch(j, "eval", "pro_fpr_limit", e.pro_fpr_limit);
    fetch(j, "eval", "normalize_fusion", e.normalize_fusion);
    fetch(j, "eval", "checkpoint", e.checkpoint);
    fetch(j, "eval", "banks", e.banks);
}

void parse_output(const nlohmann::json& j, OutputConfig& o) {
    check_keys(j, "output", {"dir", "run_name"});
    fetch(j, "output", "dir", o.dir);
    fetch(j, "output", "run_name", o.run_name);
}

}  // namespace

void RunConfig::validate() const {
    try {
        backbone.validate();
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (prompts.encoder != "synthetic" && prompts.encoder != "precomputed")
        throw ConfigError("prompts.encoder must be 'synthetic' or 'precomputed'");
    if (prompts.encoder == "precomputed" && prompts.embeddings_path.empty())
        throw ConfigError("prompts.encoder=precomputed requires prompts.embeddings_path");
    layout_from_string(data.layout);
    if (data.train_split != "train" && data.train_split != "test")
        throw ConfigError("data.train_split must be 'train' or 'test'");
    if (eval.k < 0) throw ConfigError("eval.k must be >= 0");
    if (eval.seeds.empty()) throw ConfigError("eval.seeds must be non-empty");
    if (eval.out_side <= 0) throw ConfigError("eval.out_side must be positive");
    if (eval.pro_fpr_limit <= 0.0 || eval.pro_fpr_limit > 1.0)
        throw ConfigError("eval.pro_fpr_limit must lie in (0, 1]");
    if (output.dir.empty()) throw ConfigError("output.dir must be non-empty");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    check_keys(j, "<root>", {"backbone", "prompts", "train", "data", "eval", "output"});
    RunConfig cfg;
    if (j.contains("backbone")) parse_backbone(j.at("backbone"), cfg.backbone);
    if (j.contains("prompts")) parse_prompts(j.at("prompts"), cfg.prompts);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    if (j.contains("data")) parse_data(j.at("data"), cfg.data);
    if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
    if (j.contains("output")) parse_output(j.at("output"), cfg.output);
    cfg.validate();
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["backbone"] = {{"name", cfg.backbone.name},
                     {"num_layers", cfg.backbone.num_layers},
                     {"stage_boundaries", cfg.backbone.stage_boundaries},
                     {"patch_size", cfg.backbone.patch_size},
                     {"internal_width", cfg.backbone.internal_width},
                     {"joint_width", cfg.backbone.joint_width},
                     {"input_side", cfg.backbone.input_side},
                     {"num_heads", cfg.backbone.num_heads},
                     {"gelu", cfg.backbone.gelu},
                     {"norm_mean", cfg.backbone.norm_mean},
                     {"norm_std", cfg.backbone.norm_std},
                     {"weights", cfg.backbone.weights},
                     {"seed", cfg.backbone.seed}};
    j["prompts"] = {{"templates_path", cfg.prompts.templates_path},
                    {"normal_states_path", cfg.prompts.normal_states_path},
                    {"abnormal_states_path", cfg.prompts.abnormal_states_path},
                    {"object_name", cfg.prompts.object_name},
                    {"encoder", cfg.prompts.encoder},
                    {"embeddings_path", cfg.prompts.embeddings_path},
                    {"seed", cfg.prompts.seed}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"image_side", cfg.train.image_side},
                  {"mosaic_prob", cfg.train.mosaic_prob},
                  {"focal_gamma", cfg.train.focal_gamma},
                  {"focal_alpha", cfg.train.focal_alpha},
                  {"dice_smooth", cfg.train.dice_smooth},
                  {"focal_weight", cfg.train.focal_weight},
                  {"dice_weight", cfg.train.dice_weight},
                  {"temperature", cfg.train.temperature},
                  {"seed", cfg.train.seed}};
    j["data"] = {{"train_root", cfg.data.train_root},
                 {"eval_root", cfg.data.eval_root},
                 {"layout", cfg.data.layout},
                 {"train_split", cfg.data.train_split}};
    j["eval"] = {{"k", cfg.eval.k},
                 {"seeds", cfg.eval.seeds},
                 {"out_side", cfg.eval.out_side},
                 {"pro_fpr_limit", cfg.eval.pro_fpr_limit},
                 {"normalize_fusion", cfg.eval.normalize_fusion},
                 {"checkpoint", cfg.eval.checkpoint},
                 {"banks", cfg.eval.banks}};
    j["output"] = {{"dir", cfg.output.dir}, {"run_name", cfg.output.run_name}};
    return j;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // bare strings stay strings

    nlohmann::json* node = &j;
    size_t start = 0;
    while (true) {
        const size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError("--set key has an empty path segment: '" + key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    for (const std::string& assignment : overrides) apply_override(j, assignment);
    return run_config_from_json(j);
}

}  // namespace adkit
