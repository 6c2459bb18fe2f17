#include "adkit/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "adkit/checkpoint.hpp"
#include "adkit/errors.hpp"
#include "adkit/image_ops.hpp"
#include "adkit/prompts.hpp"

namespace fs = std::filesystem;

namespace adkit {

namespace {

std::string spec_fingerprint(const BackboneSpec& spec) {
    std::ostringstream os;
    os << spec.name << '|' << spec.num_layers << '|';
    for (int b : spec.stage_boundaries) os << b << ',';
    os << '|' << spec.patch_size << '|' << spec.internal_width << '|' << spec.joint_width << '|'
       << spec.input_side << '|' << spec.num_heads << '|' << spec.gelu << '|' << spec.weights << '|'
       << spec.seed;
    for (float v : spec.norm_mean) os << '|' << v;
    for (float v : spec.norm_std) os << '|' << v;
    return os.str();
}

bool try_read_cached(const std::string& path, const BackboneSpec& spec, BackboneOutput& out) {
    try {
        TensorFileReader reader(path);
        const nlohmann::json& meta = reader.meta();
        if (!meta.contains("stages") || !meta.contains("h") || !meta.contains("w")) return false;
        const std::vector<int> stage_ids = meta["stages"].get<std::vector<int>>();
        const std::vector<int> hs = meta["h"].get<std::vector<int>>();
        const std::vector<int> ws = meta["w"].get<std::vector<int>>();
        if (stage_ids.size() != hs.size() || stage_ids.size() != ws.size()) return false;
        if (!reader.has("cls")) return false;
        const std::vector<float> cls = reader.read("cls");
        if (static_cast<int>(cls.size()) != spec.joint_width) return false;
        out.cls.v = Eigen::Map<const Eigen::VectorXf>(cls.data(), cls.size());
        out.grids.clear();
        for (size_t i = 0; i < stage_ids.size(); ++i) {
            const std::string name = "stage" + std::to_string(i);
            if (!reader.has(name)) return false;
            const TensorInfo& info = reader.info(name);
            if (info.shape.size() != 2 || info.shape[0] != int64_t(hs[i]) * ws[i] ||
                info.shape[1] != spec.internal_width)
                return false;
            const std::vector<float> buf = reader.read(name);
            PatchFeatureGrid grid;
            grid.stage = stage_ids[i];
            grid.h = hs[i];
            grid.w = ws[i];
            grid.feat =
                Eigen::Map<const RowMatrixF>(buf.data(), info.shape[0], info.shape[1]);
            out.grids.push_back(std::move(grid));
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void write_cached(const std::string& path, const BackboneOutput& out) {
    try {
        TensorFileWriter writer;
        std::vector<float> cls(out.cls.v.data(), out.cls.v.data() + out.cls.v.size());
        writer.add("cls", {static_cast<int64_t>(cls.size())}, cls);
        std::vector<int> stage_ids, hs, ws;
        for (size_t i = 0; i < out.grids.size(); ++i) {
            const PatchFeatureGrid& grid = out.grids[i];
            std::vector<float> buf(grid.feat.data(), grid.feat.data() + grid.feat.size());
            writer.add("stage" + std::to_string(i), {grid.feat.rows(), grid.feat.cols()}, buf);
            stage_ids.push_back(grid.stage);
            hs.push_back(grid.h);
            ws.push_back(grid.w);
        }
        nlohmann::json meta;
        meta["kind"] = "feature_cache";
        meta["stages"] = stage_ids;
        meta["h"] = hs;
        meta["w"] = ws;
        writer.set_meta(meta);
        writer.write(path);
    } catch (const std::exception&) {
        // cache is best-effort; never fail the run over it
    }
}

std::array<double, 8> to_array(const CategoryMetrics& m) {
    return {m.auroc_segm, m.f1max_segm, m.ap_segm, m.pro_segm,
            m.auroc_cls,  m.f1max_cls,  m.ap_cls,  m.harmonic};
}

CategoryMetrics from_array(const std::array<double, 8>& a) {
    CategoryMetrics m;
    m.auroc_segm = a[0];
    m.f1max_segm = a[1];
    m.ap_segm = a[2];
    m.pro_segm = a[3];
    m.auroc_cls = a[4];
    m.f1max_cls = a[5];
    m.ap_cls = a[6];
    m.harmonic = a[7];
    return m;
}

MetricReport aggregate(const std::vector<SeedReport>& seeds, bool std_dev) {
    const MetricReport& first = seeds.front().report;
    auto combine = [&](auto cell_of) {
        // identical per-seed values must aggregate without rounding noise:
        // mean = the value itself, stddev = exactly 0
        const std::array<double, 8> head = to_array(cell_of(seeds.front().report));
        std::array<bool, 8> same;
        same.fill(true);
        std::array<double, 8> mean{};
        for (const SeedReport& sr : seeds) {
            const std::array<double, 8> a = to_array(cell_of(sr.report));
            for (int i = 0; i < 8; ++i) {
                mean[i] += a[i];
                same[i] = same[i] && a[i] == head[i];
            }
        }
        for (int i = 0; i < 8; ++i) mean[i] = same[i] ? head[i] : mean[i] / seeds.size();
        if (!std_dev) return from_array(mean);
        std::array<double, 8> var{};
        for (const SeedReport& sr : seeds) {
            const std::array<double, 8> a = to_array(cell_of(sr.report));
            for (int i = 0; i < 8; ++i)
                if (!same[i]) var[i] += (a[i] - mean[i]) * (a[i] - mean[i]);
        }
        std::array<double, 8> out{};
        for (int i = 0; i < 8; ++i) out[i] = same[i] ? 0.0 : std::sqrt(var[i] / seeds.size());
        return from_array(out);
    };

    MetricReport agg;
    for (size_t c = 0; c < first.categories.size(); ++c)
        agg.categories.emplace_back(
            first.categories[c].first,
            combine([c](const MetricReport& r) { return r.categories[c].second; }));
    agg.mean = combine([](const MetricReport& r) { return r.mean; });
    return agg;
}

MetricReport eval_one_seed(const RunConfig& cfg, EvalMode mode, const Backbone& backbone,
                           const std::vector<ProjectionHead>& heads, const TextFeatureMatrix& ft,
                           const DatasetManifest& manifest, uint64_t seed,
                           const BankSink& bank_sink) {
    const int out_side = cfg.eval.out_side;
    const double tau = cfg.train.temperature;

    std::vector<std::pair<std::string, ClsMetrics>> cls_rows;
    std::vector<std::pair<std::string, SegMetrics>> seg_rows;
    for (const std::string& category : manifest.categories) {
        const std::vector<int> test_idx = manifest.indices(category, "test");
        if (test_idx.empty()) continue;

        std::vector<MemoryBank> banks;
        if (mode == EvalMode::Few) {
            const std::vector<int> refs =
                draw_reference_indices(manifest, category, cfg.eval.k, seed);
            std::vector<ImageTensor> ref_images;
            for (int idx : refs) {
                ImageTensor raw = load_image(manifest.samples[idx].image_path);
                ref_images.push_back(preprocess_image(raw, backbone.spec()));
            }
            banks = build_memory_banks(ref_images, backbone);
            if (bank_sink) bank_sink(category, seed, banks);
        }

        LabeledScores cls;
        std::vector<AnomalyMap> maps;
        std::vector<BinaryMask> masks;
        for (int idx : test_idx) {
            const SampleRecord& rec = manifest.samples[idx];
            ImageTensor raw = load_image(rec.image_path);
            ImageTensor pre = preprocess_image(raw, backbone.spec());
            BackboneOutput out = extract_with_cache(backbone, rec.image_path, pre);
            const double text_prob = classify_zero_shot(out.cls, ft, tau).abnormal_prob;
            AnomalyMap zero = compute_anomaly_map(out.grids, heads, ft, tau, out_side);
            if (mode == EvalMode::Few) {
                AnomalyMap few = score_few_shot_map(out.grids, banks, out_side);
                AnomalyMap fused = fuse_maps(zero, few, cfg.eval.normalize_fusion);
                cls.push_back(classify_few_shot(text_prob, fused), rec.label);
                maps.push_back(std::move(fused));
            } else {
                cls.push_back(text_prob, rec.label);
                maps.push_back(std::move(zero));
            }
            masks.push_back(mask_for_sample(rec, out_side, out_side));
        }

        try {
            ClsMetrics cm;
            cm.auroc = auroc(cls);
            cm.f1max = f1_max(cls).f1;
            cm.ap = average_precision(cls);

            LabeledScores seg;
            seg.scores.reserve(maps.size() * maps.front().v.size());
            seg.labels.reserve(seg.scores.capacity());
            for (size_t i = 0; i < maps.size(); ++i)
                for (size_t p = 0; p < maps[i].v.size(); ++p)
                    seg.push_back(maps[i].v[p], masks[i].v[p]);
            SegMetrics sm;
            sm.auroc = auroc(seg);
            sm.f1max = f1_max(seg).f1;
            sm.ap = average_precision(seg);
            sm.pro = pro(maps, masks, cfg.eval.pro_fpr_limit);

            cls_rows.emplace_back(category, cm);
            seg_rows.emplace_back(category, sm);
        } catch (const std::invalid_argument& e) {
            throw DataError("category '" + category + "': " + e.what());
        }
    }
    if (cls_rows.empty()) throw DataError("no test samples found under " + manifest.root);
    return summarize(cls_rows, seg_rows);
}

}  // namespace

EvalMode eval_mode_from_string(const std::string& name) {
    if (name == "zero") return EvalMode::Zero;
    if (name == "few") return EvalMode::Few;
    throw ConfigError("unknown eval mode '" + name + "' (expected zero|few)");
}

std::vector<int> draw_reference_indices(const DatasetManifest& manifest,
                                        const std::string& category, int k, uint64_t seed) {
    if (k < 1) throw ConfigError("few-shot evaluation requires eval.k >= 1");
    std::vector<int> pool;
    for (size_t i = 0; i < manifest.samples.size(); ++i) {
        const SampleRecord& rec = manifest.samples[i];
        if (rec.category == category && rec.split == "train" && rec.label == 0)
            pool.push_back(static_cast<int>(i));
    }
    if (static_cast<int>(pool.size()) < k)
        throw DataError("category '" + category + "' has " + std::to_string(pool.size()) +
                        " normal train images, need k=" + std::to_string(k));
    Rng rng(hash_combine(seed, fnv1a64(category.data(), category.size())));
    // partial Fisher-Yates: the first k slots are a uniform draw w/o replacement
    for (int i = 0; i < k; ++i) {
        const size_t j = i + rng.next_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

BackboneOutput extract_with_cache(const Backbone& backbone, const std::string& image_path,
                                  const ImageTensor& preprocessed) {
    const char* dir = std::getenv("ADKIT_CACHE");
    if (!dir || !*dir) return backbone.extract(preprocessed);

    std::ifstream f(image_path, std::ios::binary);
    if (!f) return backbone.extract(preprocessed);
    const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    const std::string fp = spec_fingerprint(backbone.spec());
    const uint64_t key =
        hash_combine(fnv1a64(bytes.data(), bytes.size()), fnv1a64(fp.data(), fp.size()));

    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ostringstream name;
    name << "feat-" << std::hex << key << ".adkh";
    const std::string path = (fs::path(dir) / name.str()).string();

    BackboneOutput out;
    if (fs::exists(path) && try_read_cached(path, backbone.spec(), out)) return out;
    out = backbone.extract(preprocessed);
    write_cached(path, out);
    return out;
}

TextFeatureMatrix build_text_features(const PromptConfig& prompts, int joint_width) {
    PromptEnsemble ensemble;
    ensemble.templates = prompts.templates_path.empty() ? default_template_set()
                                                        : load_prompt_lines(prompts.templates_path);
    ensemble.normal_states = prompts.normal_states_path.empty()
                                 ? default_normal_states()
                                 : load_prompt_lines(prompts.normal_states_path);
    ensemble.abnormal_states = prompts.abnormal_states_path.empty()
                                   ? default_abnormal_states()
                                   : load_prompt_lines(prompts.abnormal_states_path);
    ensemble.object_name = prompts.object_name;
    ensemble.validate();
    const auto [normal, abnormal] = render_prompts(ensemble);

    std::unique_ptr<TextEncoder> encoder;
    if (prompts.encoder == "synthetic") {
        encoder = std::make_unique<SyntheticTextEncoder>(joint_width, prompts.seed);
    } else {
        encoder = std::make_unique<PrecomputedTextEncoder>(prompts.embeddings_path);
        if (encoder->width() != joint_width)
            throw ConfigError("text embedding width " + std::to_string(encoder->width()) +
                              " does not match backbone joint_width " +
                              std::to_string(joint_width));
    }
    return encode_text_features(normal, abnormal, *encoder);
}

EvalResult run_eval(const RunConfig& cfg, EvalMode mode, const Backbone& backbone,
                    const std::vector<ProjectionHead>& heads, const TextFeatureMatrix& ft,
                    const DatasetManifest& manifest, const BankSink& bank_sink) {
    EvalResult result;
    if (mode == EvalMode::Zero) {
        // no seed dependence without reference sampling: evaluate once
        MetricReport report =
            eval_one_seed(cfg, mode, backbone, heads, ft, manifest, cfg.eval.seeds.front(), nullptr);
        for (uint64_t seed : cfg.eval.seeds) result.per_seed.push_back({seed, report});
    } else {
        for (uint64_t seed : cfg.eval.seeds)
            result.per_seed.push_back(
                {seed, eval_one_seed(cfg, mode, backbone, heads, ft, manifest, seed, bank_sink)});
    }
    result.mean = aggregate(result.per_seed, false);
    result.stddev = aggregate(result.per_seed, true);
    return result;
}

PredictOutput run_predict(const RunConfig& cfg, EvalMode mode, const Backbone& backbone,
                          const std::vector<ProjectionHead>& heads, const TextFeatureMatrix& ft,
                          const std::vector<MemoryBank>& banks, const std::string& image_path) {
    ImageTensor raw = load_image(image_path);
    ImageTensor pre = preprocess_image(raw, backbone.spec());
    BackboneOutput out = extract_with_cache(backbone, image_path, pre);
    const double text_prob = classify_zero_shot(out.cls, ft, cfg.train.temperature).abnormal_prob;
    AnomalyMap zero =
        compute_anomaly_map(out.grids, heads, ft, cfg.train.temperature, cfg.eval.out_side);

    PredictOutput po;
    if (mode == EvalMode::Few) {
        AnomalyMap few = score_few_shot_map(out.grids, banks, cfg.eval.out_side);
        po.map = fuse_maps(zero, few, cfg.eval.normalize_fusion);
        po.image_score = classify_few_shot(text_prob, po.map);
    } else {
        po.map = std::move(zero);
        po.image_score = text_prob;
    }
    po.map_max = po.map.max_value();
    po.input_h = raw.height;
    po.input_w = raw.width;
    return po;
}

}  // namespace adkit
