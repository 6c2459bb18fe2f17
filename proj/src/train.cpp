#include "adkit/train.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "adkit/errors.hpp"
#include "adkit/image_ops.hpp"

#include <json.hpp>

namespace adkit {

namespace {

struct AdamState {
    std::vector<RowMatrixD> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    int64_t t = 0;

    explicit AdamState(const std::vector<ProjectionHead>& heads) {
        for (const ProjectionHead& h : heads) {
            m_w.push_back(RowMatrixD::Zero(h.weight.rows(), h.weight.cols()));
            v_w.push_back(RowMatrixD::Zero(h.weight.rows(), h.weight.cols()));
            m_b.push_back(Eigen::VectorXd::Zero(h.bias.size()));
            v_b.push_back(Eigen::VectorXd::Zero(h.bias.size()));
        }
    }

    void step(std::vector<ProjectionHead>& heads, const HeadGradients& g, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (size_t i = 0; i < heads.size(); ++i) {
            m_w[i] = b1 * m_w[i] + (1.0 - b1) * g.dweight[i];
            v_w[i] = b2 * v_w[i] + (1.0 - b2) * g.dweight[i].cwiseProduct(g.dweight[i]);
            heads[i].weight -=
                (lr * (m_w[i] / c1).array() / ((v_w[i] / c2).array().sqrt() + eps)).matrix();
            m_b[i] = b1 * m_b[i] + (1.0 - b1) * g.dbias[i];
            v_b[i] = b2 * v_b[i] + (1.0 - b2) * g.dbias[i].cwiseProduct(g.dbias[i]);
            heads[i].bias -=
                (lr * (m_b[i] / c1).array() / ((v_b[i] / c2).array().sqrt() + eps)).matrix();
        }
    }
};

TrainSample load_train_sample(const DatasetManifest& manifest, int idx, const BackboneSpec& spec,
                              int mask_side) {
    const SampleRecord& rec = manifest.samples[idx];
    TrainSample s;
    s.category = rec.category;
    s.label = rec.label;
    ImageTensor raw = load_image(rec.image_path);
    raw.category = rec.category;
    s.image = preprocess_image(raw, spec);
    s.mask = mask_for_sample(rec, mask_side, mask_side);
    return s;
}

}  // namespace

TrainResult train_heads(const DatasetManifest& manifest, const std::string& split,
                        const Backbone& backbone, const TextFeatureMatrix& ft,
                        const TrainConfig& cfg) {
    cfg.validate();
    const BackboneSpec& spec = backbone.spec();

    std::vector<int> pool;
    std::map<std::string, std::vector<int>> by_category;
    for (size_t i = 0; i < manifest.samples.size(); ++i) {
        if (manifest.samples[i].split != split) continue;
        pool.push_back(static_cast<int>(i));
        by_category[manifest.samples[i].category].push_back(static_cast<int>(i));
    }
    if (pool.empty())
        throw DataError("no training samples in split '" + split + "' under " + manifest.root);

    TrainResult result;
    result.heads = init_heads(spec, cfg.seed);
    if (cfg.epochs == 0) return result;

    AdamState adam(result.heads);
    Rng aug_rng(hash_combine(cfg.seed, 0x6d6f73616963ULL));  // mosaic companion/gate stream

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = make_batches(static_cast<int>(pool.size()), cfg.batch_size,
                                          hash_combine(cfg.seed, 0xe70c + epoch));
        double loss_sum = 0.0;
        int sample_count = 0;
        for (const std::vector<int>& batch : batches) {
            HeadGradients batch_grads;
            batch_grads.init_like(result.heads);
            double batch_loss = 0.0;
            for (int pi : batch) {
                const int idx = pool[pi];
                std::vector<TrainSample> four;
                four.push_back(load_train_sample(manifest, idx, spec, cfg.image_side));
                const std::vector<int>& peers = by_category[manifest.samples[idx].category];
                for (int k = 0; k < 3; ++k) {
                    const int peer = peers[aug_rng.next_below(peers.size())];
                    four.push_back(load_train_sample(manifest, peer, spec, cfg.image_side));
                }
                TrainSample sample = mosaic_augment(four, cfg.mosaic_prob, aug_rng, spec.input_side);
                if (sample.mask.h != cfg.image_side)
                    sample.mask = resize_mask(sample.mask, cfg.image_side, cfg.image_side);

                BackboneOutput features = backbone.extract(sample.image);
                HeadGradients sample_grads;
                sample_grads.init_like(result.heads);
                batch_loss += head_loss_and_grad(features.grids, result.heads, ft, sample.mask,
                                                 cfg, &sample_grads);
                batch_grads.accumulate(sample_grads);
            }
            const double inv = 1.0 / static_cast<double>(batch.size());
            batch_grads.scale(inv);
            adam.step(result.heads, batch_grads, cfg.learning_rate);
            loss_sum += batch_loss;
            sample_count += static_cast<int>(batch.size());
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.mean_loss = loss_sum / sample_count;
        stats.batches = static_cast<int>(batches.size());
        result.epochs.push_back(stats);
    }
    return result;
}

void write_loss_log(const std::string& path, const std::vector<EpochStats>& epochs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write loss log: " + path);
    for (const EpochStats& e : epochs) {
        nlohmann::json line;
        line["epoch"] = e.epoch;
        line["mean_loss"] = e.mean_loss;
        line["batches"] = e.batches;
        out << line.dump() << "\n";
    }
}

}  // namespace adkit
