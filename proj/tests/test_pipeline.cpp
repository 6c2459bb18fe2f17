#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "adkit/checkpoint.hpp"
#include "adkit/errors.hpp"
#include "adkit/image_ops.hpp"
#include "adkit/pipeline.hpp"
#include "fixtures.hpp"

using namespace adkit;
namespace fs = std::filesystem;

namespace {

// zeroed heads give a constant 0.5-per-stage zero-shot map: handy when a test
// wants the few-shot term isolated
std::vector<ProjectionHead> flat_heads(const BackboneSpec& spec) {
    std::vector<ProjectionHead> heads;
    for (int s = 1; s <= spec.num_stages(); ++s) {
        ProjectionHead h;
        h.stage = s;
        h.weight = RowMatrixD::Zero(spec.internal_width, spec.joint_width);
        h.bias = Eigen::VectorXd::Zero(spec.joint_width);
        heads.push_back(std::move(h));
    }
    return heads;
}

struct PipelineSetup {
    fixtures::TempDir dir{"pipe"};
    DatasetManifest manifest;
    SyntheticBackbone backbone;
    TextFeatureMatrix ft;
    RunConfig cfg;

    explicit PipelineSetup(fixtures::MvtecFixtureOptions opt = {})
        : backbone(fixtures::tiny_spec()) {
        fixtures::make_mvtec_fixture(dir.path(), opt);
        manifest = scan_dataset(dir.path());
        Rng rng(81);
        ft = fixtures::random_text(rng, backbone.spec().joint_width);
        cfg.backbone = backbone.spec();
        cfg.train.temperature = 0.2;
        cfg.eval.out_side = 28;
    }
};

struct CacheEnvGuard {
    explicit CacheEnvGuard(const std::string& dir) { setenv("ADKIT_CACHE", dir.c_str(), 1); }
    ~CacheEnvGuard() { unsetenv("ADKIT_CACHE"); }
};

}  // namespace

TEST_CASE("eval mode names") {
    CHECK(eval_mode_from_string("zero") == EvalMode::Zero);
    CHECK(eval_mode_from_string("few") == EvalMode::Few);
    CHECK_THROWS_AS(eval_mode_from_string("one"), ConfigError);
}

TEST_CASE("reference draws are seeded, distinct, and pool-checked") {
    PipelineSetup s;
    auto a = draw_reference_indices(s.manifest, "cat0", 3, 11);
    auto b = draw_reference_indices(s.manifest, "cat0", 3, 11);
    auto c = draw_reference_indices(s.manifest, "cat0", 3, 12);
    CHECK(a == b);
    CHECK(a != c);
    REQUIRE(a.size() == 3);

    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());  // distinct
    for (int idx : a) {
        const SampleRecord& rec = s.manifest.samples[idx];
        CHECK(rec.split == "train");
        CHECK(rec.label == 0);
    }

    CHECK_THROWS_AS(draw_reference_indices(s.manifest, "cat0", 0, 1), ConfigError);
    // fixture has 6 normal train images
    CHECK_THROWS_AS(draw_reference_indices(s.manifest, "cat0", 7, 1), DataError);
    CHECK_THROWS_AS(draw_reference_indices(s.manifest, "nope", 1, 1), DataError);
}

TEST_CASE("build_text_features honors encoder choice and widths") {
    PromptConfig prompts;  // synthetic default
    TextFeatureMatrix ft = build_text_features(prompts, 24);
    REQUIRE(ft.rows.rows() == 2);
    REQUIRE(ft.rows.cols() == 24);
    CHECK(ft.rows.row(0).norm() == doctest::Approx(1.0).epsilon(1e-6));

    // same config, same features
    TextFeatureMatrix again = build_text_features(prompts, 24);
    CHECK(ft.rows == again.rows);

    PromptConfig other = prompts;
    other.seed = prompts.seed + 1;
    CHECK(build_text_features(other, 24).rows != ft.rows);

    fixtures::TempDir dir("textf");
    std::ofstream(dir.path() + "/templates.txt") << "a photo of a {} {}.\n";
    std::ofstream(dir.path() + "/normal.txt") << "flawless\n";
    std::ofstream(dir.path() + "/abnormal.txt") << "damaged\n";

    TensorFileWriter writer;
    writer.add("a photo of a flawless widget.", {3}, {1.0f, 0.0f, 0.0f});
    writer.add("a photo of a damaged widget.", {3}, {0.0f, 1.0f, 0.0f});
    writer.write(dir.path() + "/emb.adkh");

    PromptConfig pre;
    pre.encoder = "precomputed";
    pre.embeddings_path = dir.path() + "/emb.adkh";
    pre.templates_path = dir.path() + "/templates.txt";
    pre.normal_states_path = dir.path() + "/normal.txt";
    pre.abnormal_states_path = dir.path() + "/abnormal.txt";
    pre.object_name = "widget";

    TextFeatureMatrix looked_up = build_text_features(pre, 3);
    CHECK(looked_up.rows(0, 0) == doctest::Approx(1.0f));
    CHECK(looked_up.rows(1, 1) == doctest::Approx(1.0f));

    CHECK_THROWS_AS(build_text_features(pre, 24), ConfigError);  // width mismatch
}

TEST_CASE("zero-shot eval is seed-independent with a full report") {
    PipelineSetup s;
    s.cfg.eval.seeds = {0, 1, 2};
    s.cfg.eval.k = 50;  // ignored in zero mode; would exceed the pool otherwise
    auto heads = init_heads(s.backbone.spec(), 1);

    EvalResult r = run_eval(s.cfg, EvalMode::Zero, s.backbone, heads, s.ft, s.manifest);
    REQUIRE(r.per_seed.size() == 3);
    REQUIRE(r.mean.categories.size() == 1);
    CHECK(r.mean.categories[0].first == "cat0");

    auto all_metrics = [](const CategoryMetrics& m) {
        return std::vector<double>{m.auroc_segm, m.f1max_segm, m.ap_segm, m.pro_segm,
                                   m.auroc_cls, m.f1max_cls, m.ap_cls, m.harmonic};
    };
    for (double v : all_metrics(r.mean.categories[0].second)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // every seed saw the identical evaluation
    for (const SeedReport& sr : r.per_seed)
        CHECK(all_metrics(sr.report.categories[0].second) ==
              all_metrics(r.per_seed[0].report.categories[0].second));
    for (double v : all_metrics(r.stddev.categories[0].second)) CHECK(v == 0.0);
    for (double v : all_metrics(r.stddev.mean)) CHECK(v == 0.0);
}

TEST_CASE("few-shot eval separates fixture defects cleanly") {
    PipelineSetup s;
    s.cfg.eval.k = 2;
    s.cfg.eval.seeds = {0};
    auto heads = flat_heads(s.backbone.spec());

    int sink_calls = 0;
    BankSink sink = [&](const std::string& category, uint64_t seed,
                        const std::vector<MemoryBank>& banks) {
        ++sink_calls;
        CHECK(category == "cat0");
        CHECK(seed == 0);
        REQUIRE(banks.size() == 4);
        // k=2 reference images, 4x4 grid each
        CHECK(banks[0].entries.rows() == 2 * 16);
    };

    EvalResult r = run_eval(s.cfg, EvalMode::Few, s.backbone, heads, s.ft, s.manifest, sink);
    CHECK(sink_calls == 1);
    const CategoryMetrics& m = r.mean.categories[0].second;
    // flat backgrounds match the bank exactly; defect rectangles cannot
    CHECK(m.auroc_segm > 0.95);
    CHECK(m.auroc_cls == doctest::Approx(1.0));
    CHECK(m.pro_segm > 0.8);
}

TEST_CASE("eval without usable metrics raises a category-tagged error") {
    fixtures::MvtecFixtureOptions opt;
    opt.test_defect = 0;  // only good test images: no positive class anywhere
    PipelineSetup s(opt);
    s.cfg.eval.seeds = {0};
    auto heads = init_heads(s.backbone.spec(), 1);
    try {
        run_eval(s.cfg, EvalMode::Zero, s.backbone, heads, s.ft, s.manifest);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("cat0") != std::string::npos);
    }
}

TEST_CASE("feature cache round trips bit-identically and survives corruption") {
    PipelineSetup s;
    fixtures::TempDir cache_dir("cache");
    const SampleRecord& rec = s.manifest.samples[s.manifest.indices("cat0", "test")[0]];
    ImageTensor pre = preprocess_image(load_image(rec.image_path), s.backbone.spec());

    BackboneOutput direct = s.backbone.extract(pre);
    {
        CacheEnvGuard env(cache_dir.path());
        BackboneOutput first = extract_with_cache(s.backbone, rec.image_path, pre);  // miss
        BackboneOutput second = extract_with_cache(s.backbone, rec.image_path, pre); // hit

        REQUIRE(first.grids.size() == direct.grids.size());
        for (size_t g = 0; g < direct.grids.size(); ++g) {
            CHECK(first.grids[g].feat == direct.grids[g].feat);
            CHECK(second.grids[g].feat == direct.grids[g].feat);
        }
        CHECK(first.cls.v == direct.cls.v);
        CHECK(second.cls.v == direct.cls.v);

        // exactly one cache entry was written
        int entries = 0;
        std::string cached_file;
        for (const auto& e : fs::directory_iterator(cache_dir.path()))
            if (e.is_regular_file()) ++entries, cached_file = e.path().string();
        CHECK(entries == 1);

        // corrupt it: the next call must fall back to recomputing
        std::ofstream(cached_file, std::ios::binary | std::ios::trunc) << "garbage";
        BackboneOutput third = extract_with_cache(s.backbone, rec.image_path, pre);
        CHECK(third.cls.v == direct.cls.v);
        CHECK(third.grids[0].feat == direct.grids[0].feat);
    }

    // without the env var the cache directory is never touched
    fixtures::TempDir untouched("cache-off");
    BackboneOutput plain = extract_with_cache(s.backbone, rec.image_path, pre);
    CHECK(plain.cls.v == direct.cls.v);
    CHECK(fs::is_empty(untouched.path()));
}

TEST_CASE("predict zero mode reproduces the eval scoring path") {
    PipelineSetup s;
    auto heads = init_heads(s.backbone.spec(), 1);
    const SampleRecord& rec = s.manifest.samples[s.manifest.indices("cat0", "test")[0]];

    PredictOutput p = run_predict(s.cfg, EvalMode::Zero, s.backbone, heads, s.ft, {},
                                  rec.image_path);
    CHECK(p.input_h == 28);
    CHECK(p.input_w == 28);
    CHECK(p.map.h == s.cfg.eval.out_side);

    ImageTensor pre = preprocess_image(load_image(rec.image_path), s.backbone.spec());
    BackboneOutput out = s.backbone.extract(pre);
    const double text = classify_zero_shot(out.cls, s.ft, s.cfg.train.temperature).abnormal_prob;
    CHECK(p.image_score == doctest::Approx(text).epsilon(1e-12));

    AnomalyMap zero = compute_anomaly_map(out.grids, heads, s.ft, s.cfg.train.temperature,
                                          s.cfg.eval.out_side);
    CHECK(p.map_max == doctest::Approx(zero.max_value()).epsilon(1e-12));
    CHECK(p.map.v == zero.v);
}

TEST_CASE("predict few mode adds the fused-map peak") {
    PipelineSetup s;
    auto heads = flat_heads(s.backbone.spec());
    const auto train_idx = s.manifest.indices("cat0", "train");
    ImageTensor ref = preprocess_image(load_image(s.manifest.samples[train_idx[0]].image_path),
                                       s.backbone.spec());
    auto banks = build_memory_banks({ref}, s.backbone);

    const SampleRecord& rec = s.manifest.samples[s.manifest.indices("cat0", "test")[0]];
    PredictOutput p = run_predict(s.cfg, EvalMode::Few, s.backbone, heads, s.ft, banks,
                                  rec.image_path);

    ImageTensor pre = preprocess_image(load_image(rec.image_path), s.backbone.spec());
    BackboneOutput out = s.backbone.extract(pre);
    const double text = classify_zero_shot(out.cls, s.ft, s.cfg.train.temperature).abnormal_prob;
    CHECK(p.image_score == doctest::Approx(text + p.map_max).epsilon(1e-12));
    CHECK(p.map_max == doctest::Approx(p.map.max_value()).epsilon(1e-12));
    // flat zero-shot component: every pixel is 2 + few-shot distance >= ~2
    for (double v : p.map.v) CHECK(v >= 2.0 - 1e-9);
}
