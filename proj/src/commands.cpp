#include "adkit/commands.hpp"

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "adkit/errors.hpp"
#include "adkit/interp.hpp"
#include "adkit/train.hpp"

namespace fs = std::filesystem;

namespace adkit {

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_config_snapshot(const std::string& run_dir, const RunConfig& cfg) {
    write_text(run_dir + "/config.json", run_config_to_json(cfg).dump(2) + "\n");
}

void write_overlay(const std::string& path, const ImageTensor& raw, const AnomalyMap& map) {
    std::vector<double> disp = map.v;
    const auto [lo_it, hi_it] = std::minmax_element(disp.begin(), disp.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi - lo > 1e-12) {
        for (double& v : disp) v = (v - lo) / (hi - lo);
    } else {
        std::fill(disp.begin(), disp.end(), 0.0);
    }

    BilinearPlan plan(map.h, map.w, raw.height, raw.width);
    std::vector<double> up(static_cast<size_t>(raw.height) * raw.width, 0.0);
    plan.apply(disp.data(), up.data());

    cv::Mat heat(raw.height, raw.width, CV_8UC1);
    for (int r = 0; r < raw.height; ++r)
        for (int c = 0; c < raw.width; ++c)
            heat.at<uint8_t>(r, c) = static_cast<uint8_t>(
                std::clamp(up[static_cast<size_t>(r) * raw.width + c], 0.0, 1.0) * 255.0 + 0.5);
    cv::Mat heat_color;
    cv::applyColorMap(heat, heat_color, cv::COLORMAP_JET);

    cv::Mat base(raw.height, raw.width, CV_8UC3);
    for (int r = 0; r < raw.height; ++r) {
        for (int c = 0; c < raw.width; ++c) {
            const float* px = raw.px(r, c);
            base.at<cv::Vec3b>(r, c) = {static_cast<uint8_t>(px[2] * 255.0f + 0.5f),
                                        static_cast<uint8_t>(px[1] * 255.0f + 0.5f),
                                        static_cast<uint8_t>(px[0] * 255.0f + 0.5f)};
        }
    }
    cv::Mat blended;
    cv::addWeighted(base, 0.5, heat_color, 0.5, 0.0, blended);
    if (!cv::imwrite(path, blended)) throw std::runtime_error("cannot write overlay: " + path);
}

}  // namespace

std::string resolve_run_dir(const OutputConfig& out) {
    std::string name = out.run_name;
    if (name.empty()) {
        const std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "run-%Y%m%d-%H%M%S", &tm);
        name = buf;
    }
    const fs::path dir = fs::path(out.dir) / name;
    fs::create_directories(dir);
    return dir.string();
}

std::string cmd_train(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.data.train_root.empty()) throw ConfigError("data.train_root is required for train");
    DatasetManifest manifest =
        scan_dataset(cfg.data.train_root, layout_from_string(cfg.data.layout));
    std::unique_ptr<Backbone> backbone = make_backbone(cfg.backbone);
    TextFeatureMatrix ft = build_text_features(cfg.prompts, cfg.backbone.joint_width);

    TrainResult tr = train_heads(manifest, cfg.data.train_split, *backbone, ft, cfg.train);

    const std::string run_dir = resolve_run_dir(cfg.output);
    save_heads(run_dir + "/heads.adkh", tr.heads);
    write_loss_log(run_dir + "/train_log.jsonl", tr.epochs);
    write_config_snapshot(run_dir, cfg);
    return run_dir;
}

std::string cmd_eval(const RunConfig& cfg, EvalMode mode) {
    cfg.validate();
    if (cfg.data.eval_root.empty()) throw ConfigError("data.eval_root is required for eval");
    if (cfg.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required for eval");
    if (mode == EvalMode::Few && cfg.eval.k < 1)
        throw ConfigError("few-shot eval requires eval.k >= 1");

    DatasetManifest manifest = scan_dataset(cfg.data.eval_root, layout_from_string(cfg.data.layout));
    std::unique_ptr<Backbone> backbone = make_backbone(cfg.backbone);
    std::vector<ProjectionHead> heads = load_heads(cfg.eval.checkpoint, cfg.backbone);
    TextFeatureMatrix ft = build_text_features(cfg.prompts, cfg.backbone.joint_width);

    const std::string run_dir = resolve_run_dir(cfg.output);
    BankSink sink = nullptr;
    if (mode == EvalMode::Few) {
        fs::create_directories(fs::path(run_dir) / "banks");
        const uint64_t first_seed = cfg.eval.seeds.front();
        sink = [&run_dir, first_seed](const std::string& category, uint64_t seed,
                                      const std::vector<MemoryBank>& banks) {
            if (seed == first_seed)
                save_banks((fs::path(run_dir) / "banks" / (category + ".adkh")).string(), banks);
        };
    }

    EvalResult result = run_eval(cfg, mode, *backbone, heads, ft, manifest, sink);

    for (const SeedReport& sr : result.per_seed) {
        const std::string stem = run_dir + "/report_seed" + std::to_string(sr.seed);
        write_report_json(sr.report, stem + ".json");
        write_report_csv(sr.report, stem + ".csv");
    }
    write_report_json(result.mean, run_dir + "/report_mean.json");
    write_report_csv(result.mean, run_dir + "/report_mean.csv");
    write_report_json(result.stddev, run_dir + "/report_std.json");
    write_report_csv(result.stddev, run_dir + "/report_std.csv");
    write_config_snapshot(run_dir, cfg);
    return run_dir;
}

std::string cmd_predict(const RunConfig& cfg, EvalMode mode, const std::string& image_path) {
    cfg.validate();
    if (cfg.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required for predict");
    std::unique_ptr<Backbone> backbone = make_backbone(cfg.backbone);
    std::vector<ProjectionHead> heads = load_heads(cfg.eval.checkpoint, cfg.backbone);
    std::vector<MemoryBank> banks;
    if (mode == EvalMode::Few) {
        if (cfg.eval.banks.empty())
            throw ConfigError("predict in few mode requires eval.banks (a bank file from eval)");
        banks = load_banks(cfg.eval.banks, cfg.backbone);
    }
    TextFeatureMatrix ft = build_text_features(cfg.prompts, cfg.backbone.joint_width);

    ImageTensor raw = load_image(image_path);  // fail before creating the run dir
    PredictOutput po = run_predict(cfg, mode, *backbone, heads, ft, banks, image_path);

    const std::string run_dir = resolve_run_dir(cfg.output);
    const std::string stem = fs::path(image_path).stem().string();
    write_overlay(run_dir + "/" + stem + "_overlay.png", raw, po.map);
    nlohmann::json score;
    score["image_score"] = po.image_score;
    score["map_max"] = po.map_max;
    write_text(run_dir + "/" + stem + "_score.json", score.dump(2) + "\n");
    return run_dir;
}

}  // namespace adkit
