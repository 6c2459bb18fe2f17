#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "adkit/prompts.hpp"

namespace fs = std::filesystem;

namespace fixtures {

adkit::BackboneSpec tiny_spec() {
    adkit::BackboneSpec spec;
    spec.name = "synthetic";
    spec.num_layers = 4;
    spec.stage_boundaries = {1, 2, 3, 4};
    spec.patch_size = 7;
    spec.internal_width = 32;
    spec.joint_width = 24;
    spec.input_side = 28;
    spec.num_heads = 4;
    spec.seed = 11;
    return spec;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("adkit-" + tag + "-" + std::to_string(getpid()) + "-" +
                          std::to_string(counter.fetch_add(1)));
    fs::create_directories(dir);
    path_ = dir.string();
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

void write_png(const fs::path& path, const cv::Mat& img) {
    fs::create_directories(path.parent_path());
    cv::imwrite(path.string(), img);
}

}  // namespace

void make_mvtec_fixture(const std::string& root, const MvtecFixtureOptions& opt) {
    const int side = opt.image_side;
    const int grid = side / opt.patch;
    for (int ci = 0; ci < opt.categories; ++ci) {
        const std::string cat = "cat" + std::to_string(ci);
        const fs::path cat_dir = fs::path(root) / cat;
        adkit::Rng color_rng(adkit::hash_combine(opt.seed, 0xc0100 + ci));
        const int bg = 40 + static_cast<int>(color_rng.next_below(100));  // stays < 150
        const cv::Mat background(side, side, CV_8UC3, cv::Scalar(bg, bg, bg));

        char name[32];
        for (int i = 0; i < opt.train_good; ++i) {
            std::snprintf(name, sizeof(name), "%03d.png", i);
            write_png(cat_dir / "train" / "good" / name, background);
        }
        for (int i = 0; i < opt.test_good; ++i) {
            std::snprintf(name, sizeof(name), "%03d.png", i);
            write_png(cat_dir / "test" / "good" / name, background);
        }
        for (int i = 0; i < opt.test_defect; ++i) {
            adkit::Rng rng(adkit::hash_combine(opt.seed, 0xdef0 + ci * 1000 + i));
            const int pr = static_cast<int>(rng.next_below(grid));
            const int pc = static_cast<int>(rng.next_below(grid));
            const int ph = 1 + static_cast<int>(rng.next_below(std::min(2, grid - pr)));
            const int pw = 1 + static_cast<int>(rng.next_below(std::min(2, grid - pc)));
            const int fg = 160 + (i * 7) % 90;  // distinct per image, far from bg

            cv::Mat img = background.clone();
            cv::Mat mask(side, side, CV_8UC1, cv::Scalar(0));
            for (int r = pr * opt.patch; r < (pr + ph) * opt.patch; ++r) {
                for (int c = pc * opt.patch; c < (pc + pw) * opt.patch; ++c) {
                    img.at<cv::Vec3b>(r, c) = {static_cast<uint8_t>(fg),
                                               static_cast<uint8_t>((fg + 20) % 256),
                                               static_cast<uint8_t>(fg / 2)};
                    mask.at<uint8_t>(r, c) = 255;
                }
            }
            std::snprintf(name, sizeof(name), "%03d.png", i);
            write_png(cat_dir / "test" / "defect" / name, img);
            std::snprintf(name, sizeof(name), "%03d_mask.png", i);
            write_png(cat_dir / "ground_truth" / "defect" / name, mask);
        }
    }
}

adkit::LabeledScores random_scores(adkit::Rng& rng, int n, double tie_prob) {
    adkit::LabeledScores data;
    for (int i = 0; i < n; ++i) {
        double s;
        if (i > 0 && rng.next_double() < tie_prob)
            s = data.scores[rng.next_below(static_cast<uint64_t>(i))];
        else
            s = rng.next_double();
        data.push_back(s, static_cast<int>(rng.next_below(2)));
    }
    // guarantee both classes (callers always use n >= 2)
    if (std::count(data.labels.begin(), data.labels.end(), 1) == 0)
        data.labels[rng.next_below(static_cast<uint64_t>(n))] = 1;
    if (std::count(data.labels.begin(), data.labels.end(), 0) == 0) {
        const uint64_t idx = rng.next_below(static_cast<uint64_t>(n));
        data.labels[idx] = 0;
        data.labels[(idx + 1) % n] = 1;
    }
    return data;
}

adkit::ImageTensor random_image(adkit::Rng& rng, int side) {
    adkit::ImageTensor img;
    img.height = side;
    img.width = side;
    img.category = "cat0";
    img.pixels.resize(static_cast<size_t>(side) * side * 3);
    for (float& v : img.pixels) v = static_cast<float>(rng.next_double());
    return img;
}

adkit::PatchFeatureGrid random_grid(adkit::Rng& rng, int stage, int h, int w, int dim) {
    adkit::PatchFeatureGrid grid;
    grid.stage = stage;
    grid.h = h;
    grid.w = w;
    grid.feat.resize(static_cast<Eigen::Index>(h) * w, dim);
    for (Eigen::Index r = 0; r < grid.feat.rows(); ++r)
        for (Eigen::Index c = 0; c < grid.feat.cols(); ++c)
            grid.feat(r, c) = static_cast<float>(rng.next_gaussian());
    return grid;
}

adkit::TextFeatureMatrix random_text(adkit::Rng& rng, int width) {
    adkit::TextFeatureMatrix ft;
    ft.rows.resize(2, width);
    for (int r = 0; r < 2; ++r) {
        double sq = 0.0;
        std::vector<double> vals(width);
        for (int c = 0; c < width; ++c) {
            vals[c] = rng.next_gaussian();
            sq += vals[c] * vals[c];
        }
        const double inv = 1.0 / std::max(std::sqrt(sq), 1e-30);
        for (int c = 0; c < width; ++c) ft.rows(r, c) = static_cast<float>(vals[c] * inv);
    }
    return ft;
}

}  // namespace fixtures
