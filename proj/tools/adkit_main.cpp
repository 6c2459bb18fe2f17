#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adkit/commands.hpp"
#include "adkit/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"zero-/few-shot industrial anomaly classification and segmentation"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string layout;
    std::string mode_str = "zero";
    std::string image_path;
    std::string banks_path;

    auto add_common = [&](CLI::App* sub, bool with_mode) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--set", overrides, "override a config key, e.g. --set eval.k=4")
            ->take_all();
        sub->add_option("--layout", layout, "dataset layout: mvtec|visa");
        if (with_mode) sub->add_option("--mode", mode_str, "zero|few (default zero)");
    };

    CLI::App* train = app.add_subcommand("train", "fit the projection heads");
    add_common(train, false);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint over all categories");
    add_common(eval, true);
    CLI::App* predict = app.add_subcommand("predict", "score one image, write overlay + JSON");
    add_common(predict, true);
    predict->add_option("image", image_path, "input image path")->required();
    predict->add_option("--banks", banks_path, "memory-bank file (few mode)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!layout.empty()) overrides.push_back("data.layout=" + layout);
        if (!banks_path.empty()) overrides.push_back("eval.banks=" + banks_path);
        const adkit::RunConfig cfg = adkit::load_run_config(config_path, overrides);
        std::string run_dir;
        if (train->parsed()) {
            run_dir = adkit::cmd_train(cfg);
        } else if (eval->parsed()) {
            run_dir = adkit::cmd_eval(cfg, adkit::eval_mode_from_string(mode_str));
        } else {
            run_dir = adkit::cmd_predict(cfg, adkit::eval_mode_from_string(mode_str), image_path);
        }
        std::cout << "outputs written to " << run_dir << "\n";
        return 0;
    } catch (const adkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const adkit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const adkit::MissingCheckpoint& e) {
        std::cerr << "missing checkpoint: " << e.what() << "\n";
        return 4;
    } catch (const adkit::CheckpointParseError& e) {
        std::cerr << "bad checkpoint: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
