#include "adkit/data.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "adkit/errors.hpp"
#include "adkit/image_ops.hpp"

namespace fs = std::filesystem;

namespace adkit {

namespace {

bool has_image_ext(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) return names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<std::string> sorted_images(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) return names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_ext(entry.path()))
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

DatasetManifest scan_mvtec(const std::string& root) {
    DatasetManifest manifest;
    manifest.root = root;
    manifest.layout = DatasetLayout::Mvtec;

    std::vector<std::string> missing_masks;
    for (const std::string& category : sorted_subdirs(root)) {
        const fs::path cat_dir = fs::path(root) / category;
        if (!fs::is_directory(cat_dir / "train") && !fs::is_directory(cat_dir / "test")) continue;
        manifest.categories.push_back(category);
        for (const char* split : {"train", "test"}) {
            for (const std::string& defect : sorted_subdirs(cat_dir / split)) {
                for (const std::string& file : sorted_images(cat_dir / split / defect)) {
                    SampleRecord rec;
                    rec.category = category;
                    rec.split = split;
                    rec.defect_type = defect;
                    rec.image_path = (cat_dir / split / defect / file).string();
                    rec.label = defect == "good" ? 0 : 1;
                    if (rec.label == 1) {
                        const fs::path mask = cat_dir / "ground_truth" / defect /
                                              (fs::path(file).stem().string() + "_mask.png");
                        if (fs::is_regular_file(mask)) {
                            rec.mask_path = mask.string();
                        } else if (rec.split == "test") {
                            missing_masks.push_back(mask.string());
                        }
                    }
                    manifest.samples.push_back(std::move(rec));
                }
            }
        }
    }
    if (!missing_masks.empty()) {
        std::string msg = "missing masks for anomalous test samples:";
        for (const std::string& m : missing_masks) msg += "\n  " + m;
        throw DataError(msg);
    }
    return manifest;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

DatasetManifest scan_visa(const std::string& root) {
    const fs::path csv_path = fs::path(root) / "split_csv" / "1cls.csv";
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open " + csv_path.string());

    DatasetManifest manifest;
    manifest.root = root;
    manifest.layout = DatasetLayout::Visa;

    std::string line;
    if (!std::getline(in, line)) throw DataError(csv_path.string() + ": empty file");
    {
        std::vector<std::string> header = split_csv_line(line);
        const std::vector<std::string> expected = {"object", "split", "label", "image", "mask"};
        if (header != expected)
            throw DataError(csv_path.string() + ": expected header object,split,label,image,mask");
    }

    std::vector<std::string> missing_masks;
    std::vector<std::string> missing_images;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 5)
            throw DataError(csv_path.string() + ":" + std::to_string(line_no) +
                            ": expected 5 fields, got " + std::to_string(fields.size()));
        SampleRecord rec;
        rec.category = fields[0];
        rec.split = fields[1];
        if (rec.split != "train" && rec.split != "test")
            throw DataError(csv_path.string() + ":" + std::to_string(line_no) +
                            ": unknown split '" + rec.split + "'");
        if (fields[2] == "normal") {
            rec.label = 0;
            rec.defect_type = "good";
        } else if (fields[2] == "anomaly") {
            rec.label = 1;
            rec.defect_type = "anomaly";
        } else {
            throw DataError(csv_path.string() + ":" + std::to_string(line_no) + ": unknown label '" +
                            fields[2] + "'");
        }
        rec.image_path = (fs::path(root) / fields[3]).string();
        if (!fs::is_regular_file(rec.image_path)) missing_images.push_back(rec.image_path);
        if (rec.label == 1) {
            if (fields[4].empty()) {
                if (rec.split == "test")
                    missing_masks.push_back(rec.image_path + " (no mask column entry)");
            } else {
                rec.mask_path = (fs::path(root) / fields[4]).string();
                if (!fs::is_regular_file(rec.mask_path)) {
                    if (rec.split == "test") missing_masks.push_back(rec.mask_path);
                    rec.mask_path.clear();
                }
            }
        }
        manifest.samples.push_back(std::move(rec));
    }
    if (!missing_images.empty()) {
        std::string msg = "missing image files listed in " + csv_path.string() + ":";
        for (const std::string& m : missing_images) msg += "\n  " + m;
        throw DataError(msg);
    }
    if (!missing_masks.empty()) {
        std::string msg = "missing masks for anomalous test samples:";
        for (const std::string& m : missing_masks) msg += "\n  " + m;
        throw DataError(msg);
    }

    std::stable_sort(manifest.samples.begin(), manifest.samples.end(),
                     [](const SampleRecord& a, const SampleRecord& b) {
                         return std::tie(a.category, a.split, a.defect_type, a.image_path) <
                                std::tie(b.category, b.split, b.defect_type, b.image_path);
                     });
    for (const SampleRecord& rec : manifest.samples)
        if (manifest.categories.empty() || manifest.categories.back() != rec.category)
            manifest.categories.push_back(rec.category);
    return manifest;
}

}  // namespace

DatasetLayout layout_from_string(const std::string& name) {
    if (name == "auto") return DatasetLayout::Auto;
    if (name == "mvtec") return DatasetLayout::Mvtec;
    if (name == "visa") return DatasetLayout::Visa;
    throw ConfigError("unknown dataset layout '" + name + "' (expected auto|mvtec|visa)");
}

std::string layout_to_string(DatasetLayout layout) {
    switch (layout) {
        case DatasetLayout::Auto: return "auto";
        case DatasetLayout::Mvtec: return "mvtec";
        case DatasetLayout::Visa: return "visa";
    }
    return "auto";
}

std::vector<int> DatasetManifest::indices(const std::string& category,
                                          const std::string& split) const {
    std::vector<int> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].category == category && samples[i].split == split)
            out.push_back(static_cast<int>(i));
    return out;
}

DatasetManifest scan_dataset(const std::string& root, DatasetLayout layout) {
    if (!fs::is_directory(root)) throw DataError("dataset root does not exist: " + root);
    if (layout == DatasetLayout::Auto)
        layout = fs::is_regular_file(fs::path(root) / "split_csv" / "1cls.csv")
                     ? DatasetLayout::Visa
                     : DatasetLayout::Mvtec;
    return layout == DatasetLayout::Visa ? scan_visa(root) : scan_mvtec(root);
}

ImageTensor load_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot read image: " + path);
    ImageTensor img;
    img.height = bgr.rows;
    img.width = bgr.cols;
    img.pixels.resize(static_cast<size_t>(bgr.rows) * bgr.cols * 3);
    for (int r = 0; r < bgr.rows; ++r) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(r);
        for (int c = 0; c < bgr.cols; ++c) {
            const size_t base = (static_cast<size_t>(r) * bgr.cols + c) * 3;
            img.pixels[base + 0] = row[c][2] / 255.0f;
            img.pixels[base + 1] = row[c][1] / 255.0f;
            img.pixels[base + 2] = row[c][0] / 255.0f;
        }
    }
    return img;
}

BinaryMask load_mask_file(const std::string& path) {
    cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw DataError("cannot read mask: " + path);
    BinaryMask mask(gray.rows, gray.cols);
    for (int r = 0; r < gray.rows; ++r) {
        const uint8_t* row = gray.ptr<uint8_t>(r);
        for (int c = 0; c < gray.cols; ++c) mask.at(r, c) = row[c] >= 128 ? 1 : 0;
    }
    return mask;
}

BinaryMask mask_for_sample(const SampleRecord& record, int h, int w) {
    if (record.mask_path.empty()) return BinaryMask(h, w);
    return resize_mask(load_mask_file(record.mask_path), h, w);
}

TrainSample mosaic_augment(const std::vector<TrainSample>& four, double p, Rng& rng,
                           int out_side) {
    if (four.size() != 4) throw std::invalid_argument("mosaic_augment: need exactly 4 samples");
    for (const TrainSample& s : four)
        if (s.category != four[0].category)
            throw std::invalid_argument("mosaic_augment: mixed categories (" + four[0].category +
                                        " vs " + s.category + ")");
    const bool apply = rng.next_double() < p;
    if (!apply) return four[0];

    const int h = four[0].image.height;
    const int w = four[0].image.width;
    for (const TrainSample& s : four)
        if (s.image.height != h || s.image.width != w || s.mask.h != h || s.mask.w != w)
            throw std::invalid_argument("mosaic_augment: samples must share dimensions");

    ImageTensor composite;
    composite.category = four[0].category;
    composite.height = 2 * h;
    composite.width = 2 * w;
    composite.pixels.assign(static_cast<size_t>(4) * h * w * 3, 0.0f);
    BinaryMask composite_mask(2 * h, 2 * w);

    for (int t = 0; t < 4; ++t) {
        const int row0 = (t / 2) * h;
        const int col0 = (t % 2) * w;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const float* src = four[t].image.px(r, c);
                float* dst = composite.px(row0 + r, col0 + c);
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
                composite_mask.at(row0 + r, col0 + c) = four[t].mask.at(r, c);
            }
        }
    }

    TrainSample out;
    out.category = four[0].category;
    out.image = resize_image(composite, out_side, out_side);
    out.mask = resize_mask(composite_mask, out_side, out_side);
    out.label = 0;
    for (const TrainSample& s : four) out.label |= s.label;
    return out;
}

std::vector<std::vector<int>> make_batches(int n, int batch_size, uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(start + batch_size, n);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

}  // namespace adkit
