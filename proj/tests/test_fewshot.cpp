#include <doctest.h>

#include "adkit/errors.hpp"
#include "adkit/fewshot.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adkit;

namespace {

std::vector<MemoryBank> banks_from_rows(const std::vector<RowMatrixD>& per_stage) {
    std::vector<MemoryBank> banks;
    for (size_t s = 0; s < per_stage.size(); ++s) {
        MemoryBank b;
        b.stage = static_cast<int>(s) + 1;
        b.entries = per_stage[s];
        for (Eigen::Index r = 0; r < b.entries.rows(); ++r)
            b.entries.row(r) /= b.entries.row(r).norm();
        b.source_count = 1;
        banks.push_back(std::move(b));
    }
    return banks;
}

}  // namespace

TEST_CASE("memory banks hold normalized rows from every stage") {
    BackboneSpec spec = fixtures::tiny_spec();
    SyntheticBackbone bb(spec);
    Rng rng(51);
    std::vector<ImageTensor> refs = {fixtures::random_image(rng, spec.input_side),
                                     fixtures::random_image(rng, spec.input_side)};

    auto banks = build_memory_banks(refs, bb);
    REQUIRE(banks.size() == 4);
    const int per_image = spec.grid_side() * spec.grid_side();
    for (int s = 0; s < 4; ++s) {
        CHECK(banks[s].stage == s + 1);
        CHECK(banks[s].source_count == 2);
        CHECK(banks[s].entries.rows() == 2 * per_image);
        CHECK(banks[s].entries.cols() == spec.internal_width);
        for (Eigen::Index r = 0; r < banks[s].entries.rows(); ++r)
            CHECK(banks[s].entries.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }

    CHECK_THROWS(build_memory_banks({}, bb));
}

TEST_CASE("few-shot map equals the brute-force scan exactly") {
    Rng rng(52);
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = 4 + static_cast<int>(rng.next_below(6));
        const int side = 2 + static_cast<int>(rng.next_below(3));
        const int n_stages = 1 + static_cast<int>(rng.next_below(3));
        const int bank_n = 1 + static_cast<int>(rng.next_below(63));

        std::vector<PatchFeatureGrid> grids;
        std::vector<RowMatrixD> bank_rows;
        for (int s = 1; s <= n_stages; ++s) {
            grids.push_back(fixtures::random_grid(rng, s, side, side, dim));
            RowMatrixD rows(bank_n, dim);
            for (Eigen::Index r = 0; r < rows.rows(); ++r)
                for (Eigen::Index c = 0; c < rows.cols(); ++c)
                    rows(r, c) = rng.next_gaussian();
            bank_rows.push_back(std::move(rows));
        }
        auto banks = banks_from_rows(bank_rows);

        // out_side == grid side: the upsample is the identity and the result
        // must match an independent naive scan bit for bit
        AnomalyMap got = score_few_shot_map(grids, banks, side);
        std::vector<double> want(static_cast<size_t>(side) * side, 0.0);
        for (int s = 0; s < n_stages; ++s) {
            std::vector<std::vector<double>> test_rows;
            for (Eigen::Index r = 0; r < grids[s].feat.rows(); ++r) {
                std::vector<float> raw(dim);
                for (int c = 0; c < dim; ++c) raw[c] = grids[s].feat(r, c);
                test_rows.push_back(oracle::normalize_row(raw));
            }
            std::vector<std::vector<double>> entry_rows;
            for (Eigen::Index r = 0; r < banks[s].entries.rows(); ++r) {
                std::vector<double> e(dim);
                for (int c = 0; c < dim; ++c) e[c] = banks[s].entries(r, c);
                entry_rows.push_back(std::move(e));
            }
            auto stage_min = oracle::bank_scan(test_rows, entry_rows);
            for (size_t i = 0; i < want.size(); ++i) want[i] += stage_min[i];
        }
        for (size_t i = 0; i < want.size(); ++i) CHECK(got.v[i] == want[i]);
    }
}

TEST_CASE("a bank built from the test image itself scores zero") {
    BackboneSpec spec = fixtures::tiny_spec();
    SyntheticBackbone bb(spec);
    Rng rng(53);
    ImageTensor img = fixtures::random_image(rng, spec.input_side);

    auto banks = build_memory_banks({img}, bb);
    BackboneOutput out = bb.extract(img);
    AnomalyMap map = score_few_shot_map(out.grids, banks, spec.grid_side());
    for (double v : map.v) {
        CHECK(v >= -1e-5);
        CHECK(v <= 1e-5);
    }
}

TEST_CASE("growing a bank never increases any pixel") {
    Rng rng(54);
    const int dim = 6, side = 3;
    std::vector<PatchFeatureGrid> grids = {fixtures::random_grid(rng, 1, side, side, dim)};

    RowMatrixD small(5, dim), large(9, dim);
    for (Eigen::Index r = 0; r < large.rows(); ++r)
        for (Eigen::Index c = 0; c < large.cols(); ++c)
            large(r, c) = rng.next_gaussian();
    small = large.topRows(5);

    auto banks_small = banks_from_rows({small});
    auto banks_large = banks_from_rows({large});
    AnomalyMap a = score_few_shot_map(grids, banks_small, side);
    AnomalyMap b = score_few_shot_map(grids, banks_large, side);
    for (size_t i = 0; i < a.v.size(); ++i) CHECK(b.v[i] <= a.v[i]);
}

TEST_CASE("score_few_shot_map validates its inputs") {
    Rng rng(55);
    std::vector<PatchFeatureGrid> grids = {fixtures::random_grid(rng, 1, 2, 2, 4)};
    auto banks = banks_from_rows({RowMatrixD::Random(3, 4)});

    CHECK_THROWS(score_few_shot_map({}, banks, 2));
    CHECK_THROWS(score_few_shot_map(grids, {}, 2));

    auto wrong_stage = banks;
    wrong_stage[0].stage = 7;
    CHECK_THROWS(score_few_shot_map(grids, wrong_stage, 2));

    auto wrong_width = banks_from_rows({RowMatrixD::Random(3, 5)});
    CHECK_THROWS(score_few_shot_map(grids, wrong_width, 2));

    auto empty_bank = banks;
    empty_bank[0].entries.resize(0, 4);
    CHECK_THROWS(score_few_shot_map(grids, empty_bank, 2));
}

TEST_CASE("map fusion adds pixels and can pre-normalize") {
    AnomalyMap a(2, 2, AnomalyMap::Resolution::Image);
    AnomalyMap b(2, 2, AnomalyMap::Resolution::Image);
    a.v = {0.0, 1.0, 2.0, 3.0};
    b.v = {10.0, 10.0, 10.0, 14.0};

    AnomalyMap plain = fuse_maps(a, b);
    CHECK(plain.v == std::vector<double>{10.0, 11.0, 12.0, 17.0});

    AnomalyMap scaled = fuse_maps(a, b, true);
    // each map min-maxed to [0,1] first
    CHECK(scaled.v[0] == doctest::Approx(0.0));
    CHECK(scaled.v[3] == doctest::Approx(2.0));
    CHECK(scaled.v[1] == doctest::Approx(1.0 / 3.0));

    // a constant map normalizes to zeros instead of dividing by zero
    AnomalyMap flat(2, 2, AnomalyMap::Resolution::Image);
    flat.v = {5.0, 5.0, 5.0, 5.0};
    AnomalyMap safe = fuse_maps(flat, b, true);
    CHECK(safe.v[0] == doctest::Approx(0.0));
    CHECK(safe.v[3] == doctest::Approx(1.0));

    AnomalyMap wrong(3, 3, AnomalyMap::Resolution::Image);
    CHECK_THROWS(fuse_maps(a, wrong));
}

TEST_CASE("few-shot image score adds the map peak to the text score") {
    AnomalyMap m(2, 2, AnomalyMap::Resolution::Image);
    m.v = {0.1, 0.9, 0.4, 0.2};
    CHECK(classify_few_shot(0.35, m) == doctest::Approx(0.35 + 0.9).epsilon(1e-12));
}

TEST_CASE("bank checkpoints round trip") {
    fixtures::TempDir dir("banks");
    BackboneSpec spec = fixtures::tiny_spec();
    SyntheticBackbone bb(spec);
    Rng rng(56);
    auto banks = build_memory_banks({fixtures::random_image(rng, spec.input_side)}, bb);

    const std::string path = dir.path() + "/banks.adkh";
    save_banks(path, banks);
    auto loaded = load_banks(path, spec);
    REQUIRE(loaded.size() == banks.size());
    for (size_t s = 0; s < banks.size(); ++s) {
        CHECK(loaded[s].stage == banks[s].stage);
        REQUIRE(loaded[s].entries.rows() == banks[s].entries.rows());
        CHECK((loaded[s].entries - banks[s].entries).cwiseAbs().maxCoeff() < 1e-6);
    }

    CHECK_THROWS_AS(load_banks(dir.path() + "/nope.adkh", spec), MissingCheckpoint);

    BackboneSpec fewer = spec;
    fewer.num_layers = 3;
    fewer.stage_boundaries = {1, 2, 3};
    CHECK_NOTHROW(load_banks(path, fewer));  // extra stages are not demanded

    BackboneSpec wider = spec;
    wider.internal_width = spec.internal_width + 1;
    CHECK_THROWS_AS(load_banks(path, wider), CheckpointParseError);
}
