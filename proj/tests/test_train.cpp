#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "adkit/errors.hpp"
#include "adkit/train.hpp"
#include "fixtures.hpp"

using namespace adkit;

namespace {

struct TrainSetup {
    fixtures::TempDir dir{"train"};
    DatasetManifest manifest;
    SyntheticBackbone backbone;
    TextFeatureMatrix ft;

    explicit TrainSetup(int train_good = 8) : backbone(fixtures::tiny_spec()) {
        fixtures::MvtecFixtureOptions opt;
        opt.train_good = train_good;
        fixtures::make_mvtec_fixture(dir.path(), opt);
        manifest = scan_dataset(dir.path());
        Rng rng(71);
        ft = fixtures::random_text(rng, backbone.spec().joint_width);
    }
};

TrainConfig fast_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.image_side = 28;
    cfg.learning_rate = 5e-3;
    cfg.temperature = 0.2;  // keep the two-way softmax out of saturation
    cfg.mosaic_prob = 0.25;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("zero epochs returns the untouched initialization") {
    TrainSetup s;
    TrainConfig cfg = fast_config();
    cfg.epochs = 0;

    TrainResult r = train_heads(s.manifest, "train", s.backbone, s.ft, cfg);
    CHECK(r.epochs.empty());
    auto init = init_heads(s.backbone.spec(), cfg.seed);
    REQUIRE(r.heads.size() == init.size());
    for (size_t i = 0; i < init.size(); ++i) {
        CHECK(r.heads[i].weight == init[i].weight);
        CHECK(r.heads[i].bias == init[i].bias);
    }
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    TrainSetup s;
    TrainConfig cfg = fast_config();
    cfg.epochs = 1;

    TrainResult a = train_heads(s.manifest, "train", s.backbone, s.ft, cfg);
    TrainResult b = train_heads(s.manifest, "train", s.backbone, s.ft, cfg);
    REQUIRE(a.heads.size() == b.heads.size());
    for (size_t i = 0; i < a.heads.size(); ++i) {
        CHECK(a.heads[i].weight == b.heads[i].weight);
        CHECK(a.heads[i].bias == b.heads[i].bias);
    }
    REQUIRE(a.epochs.size() == 1);
    CHECK(a.epochs[0].mean_loss == b.epochs[0].mean_loss);
    CHECK(a.epochs[0].batches == 2);  // 8 samples / batch 4
    CHECK(a.epochs[0].epoch == 1);

    TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    TrainResult c = train_heads(s.manifest, "train", s.backbone, s.ft, other);
    CHECK(a.heads[0].weight != c.heads[0].weight);
}

TEST_CASE("loss falls over a few epochs on the fixture") {
    TrainSetup s;
    TrainConfig cfg = fast_config();
    cfg.epochs = 3;
    cfg.mosaic_prob = 0.0;  // keep the target stationary for a clean trend

    TrainResult r = train_heads(s.manifest, "train", s.backbone, s.ft, cfg);
    REQUIRE(r.epochs.size() == 3);
    CHECK(r.epochs.back().mean_loss < r.epochs.front().mean_loss);
    for (const EpochStats& e : r.epochs) {
        CHECK(e.mean_loss > 0.0);
        CHECK(std::isfinite(e.mean_loss));
    }
}

TEST_CASE("an empty split is a data error") {
    TrainSetup s;
    CHECK_THROWS_AS(train_heads(s.manifest, "validation", s.backbone, s.ft, fast_config()),
                    DataError);
}

TEST_CASE("loss log is one json object per line") {
    fixtures::TempDir dir("losslog");
    const std::string path = dir.path() + "/log.jsonl";
    write_loss_log(path, {{1, 0.75, 2}, {2, 0.5, 2}});

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    auto j = nlohmann::json::parse(line);
    CHECK(j["epoch"] == 1);
    CHECK(j["mean_loss"] == doctest::Approx(0.75));
    CHECK(j["batches"] == 2);
    REQUIRE(std::getline(in, line));
    CHECK(nlohmann::json::parse(line)["epoch"] == 2);
    CHECK_FALSE(std::getline(in, line));
}
