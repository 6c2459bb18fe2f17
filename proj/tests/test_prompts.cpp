#include <doctest.h>

#include <fstream>

#include "adkit/checkpoint.hpp"
#include "adkit/prompts.hpp"
#include "fixtures.hpp"

using namespace adkit;

static PromptEnsemble tiny_ensemble() {
    PromptEnsemble e;
    e.normal_states = {"flawless", "perfect"};
    e.abnormal_states = {"damaged"};
    e.templates = {"a photo of a {} {}.", "a cropped photo of the {} {}."};
    e.object_name = "widget";
    return e;
}

TEST_CASE("ensemble validation rejects bad input") {
    PromptEnsemble e = tiny_ensemble();
    CHECK_NOTHROW(e.validate());

    PromptEnsemble empty_states = e;
    empty_states.normal_states.clear();
    CHECK_THROWS(empty_states.validate());

    PromptEnsemble no_object = e;
    no_object.object_name.clear();
    CHECK_THROWS(no_object.validate());

    PromptEnsemble one_slot = e;
    one_slot.templates = {"a photo of a {}."};
    CHECK_THROWS(one_slot.validate());

    PromptEnsemble three_slots = e;
    three_slots.templates = {"{} {} {}"};
    CHECK_THROWS(three_slots.validate());
}

TEST_CASE("render order is state-major with state then object filled in") {
    auto [normal, abnormal] = render_prompts(tiny_ensemble());
    REQUIRE(normal.size() == 4);  // 2 states x 2 templates
    REQUIRE(abnormal.size() == 2);
    CHECK(normal[0] == "a photo of a flawless widget.");
    CHECK(normal[1] == "a cropped photo of the flawless widget.");
    CHECK(normal[2] == "a photo of a perfect widget.");
    CHECK(normal[3] == "a cropped photo of the perfect widget.");
    CHECK(abnormal[0] == "a photo of a damaged widget.");
    CHECK(abnormal[1] == "a cropped photo of the damaged widget.");
}

TEST_CASE("default prompt assets are well-formed") {
    const auto templates = default_template_set();
    const auto normal = default_normal_states();
    const auto abnormal = default_abnormal_states();
    CHECK(templates.size() == 35);
    CHECK(normal.size() == 4);
    CHECK(abnormal.size() == 4);

    PromptEnsemble e;
    e.templates = templates;
    e.normal_states = normal;
    e.abnormal_states = abnormal;
    e.object_name = "object";
    CHECK_NOTHROW(e.validate());  // every template carries exactly two slots

    auto [n, a] = render_prompts(e);
    CHECK(n.size() == 140);
    CHECK(a.size() == 140);
}

TEST_CASE("synthetic encoder is deterministic and sentence-sensitive") {
    SyntheticTextEncoder enc(16, 7);
    auto a = enc.encode("a photo of a widget.");
    auto b = enc.encode("a photo of a widget.");
    auto c = enc.encode("a photo of a gadget.");
    REQUIRE(a.size() == 16);
    CHECK(a == b);
    CHECK(a != c);

    SyntheticTextEncoder other_seed(16, 8);
    CHECK(a != other_seed.encode("a photo of a widget."));
}

TEST_CASE("text features are unit rows with row 0 normal") {
    Rng rng(2);
    SyntheticTextEncoder enc(24, 3);
    auto [normal, abnormal] = render_prompts(tiny_ensemble());
    TextFeatureMatrix ft = encode_text_features(normal, abnormal, enc);
    REQUIRE(ft.rows.rows() == 2);
    REQUIRE(ft.rows.cols() == 24);
    CHECK(ft.rows.row(0).norm() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ft.rows.row(1).norm() == doctest::Approx(1.0).epsilon(1e-6));

    // row 0 must match the hand-computed normal class mean
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(24);
    for (const auto& s : normal) {
        Eigen::VectorXd e = enc.encode(s).cast<double>();
        mean += e / e.norm();
    }
    mean /= static_cast<double>(normal.size());
    mean /= mean.norm();
    for (int i = 0; i < 24; ++i)
        CHECK(ft.rows(0, i) == doctest::Approx(mean[i]).epsilon(1e-6));

    CHECK_THROWS(encode_text_features({}, abnormal, enc));
}

TEST_CASE("precomputed encoder round trips and rejects unknown sentences") {
    fixtures::TempDir dir("prompts");
    const std::string path = dir.path() + "/text.adkh";

    TensorFileWriter writer;
    writer.add("hello world", {3}, {1.0f, 2.0f, 3.0f});
    writer.add("second line", {3}, {0.5f, -0.5f, 0.0f});
    writer.write(path);

    PrecomputedTextEncoder enc(path);
    CHECK(enc.width() == 3);
    auto v = enc.encode("hello world");
    REQUIRE(v.size() == 3);
    CHECK(v[1] == 2.0f);
    CHECK_THROWS(enc.encode("never stored"));
}

TEST_CASE("prompt line files skip comments, blanks, and CR endings") {
    fixtures::TempDir dir("lines");
    const std::string path = dir.path() + "/states.txt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "# heading comment\n";
        out << "flawless\n";
        out << "\n";
        out << "  \n";
        out << "damaged\r\n";
        out << "scratched";  // no trailing newline
    }
    auto lines = load_prompt_lines(path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "flawless");
    CHECK(lines[1] == "damaged");
    CHECK(lines[2] == "scratched");

    CHECK_THROWS(load_prompt_lines(dir.path() + "/missing.txt"));
}

TEST_CASE("shipped prompt assets match the built-in defaults") {
    const std::string dir = ADKIT_ASSETS_DIR;
    CHECK(load_prompt_lines(dir + "/templates.txt") == default_template_set());
    CHECK(load_prompt_lines(dir + "/states_normal.txt") == default_normal_states());
    CHECK(load_prompt_lines(dir + "/states_abnormal.txt") == default_abnormal_states());
}
