#include "adkit/zeroshot.hpp"

#include <cmath>
#include <stdexcept>

#include "adkit/checkpoint.hpp"
#include "adkit/interp.hpp"
#include "adkit/rng.hpp"

namespace adkit {

namespace {

constexpr double kProbEps = 1e-7;
constexpr double kNormFloor = 1e-30;

void check_pred_mask(const AnomalyMap& pred, const BinaryMask& mask, const char* op) {
    if (pred.h != mask.h || pred.w != mask.w)
        throw std::invalid_argument(std::string(op) + ": prediction/mask shape mismatch");
    if (pred.v.empty()) throw std::invalid_argument(std::string(op) + ": empty prediction");
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (batch_size <= 0) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(mosaic_prob >= 0.0 && mosaic_prob <= 1.0))
        throw std::invalid_argument("train config: mosaic_prob must be in [0,1]");
    if (!(temperature > 0.0))
        throw std::invalid_argument("train config: temperature must be positive");
    if (image_side <= 0) throw std::invalid_argument("train config: image_side must be positive");
}

ScorePair classify_zero_shot(const ClassEmbedding& fc, const TextFeatureMatrix& ft, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("classify_zero_shot: tau must be positive");
    if (fc.v.size() != ft.rows.cols())
        throw std::invalid_argument("classify_zero_shot: embedding width mismatch");
    const Eigen::VectorXd f = fc.v.cast<double>();
    const double l0 = f.dot(ft.rows.row(0).cast<double>()) / tau;
    const double l1 = f.dot(ft.rows.row(1).cast<double>()) / tau;
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

RowMatrixD project_stage_features(const PatchFeatureGrid& grid, const ProjectionHead& head) {
    if (grid.feat.cols() != head.weight.rows())
        throw std::invalid_argument("project_stage_features: feature width " +
                                    std::to_string(grid.feat.cols()) +
                                    " does not match head input width " +
                                    std::to_string(head.weight.rows()));
    RowMatrixD z = grid.feat.cast<double>() * head.weight;
    z.rowwise() += head.bias.transpose();
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double n = std::max(z.row(r).norm(), kNormFloor);
        z.row(r) /= n;
    }
    return z;
}

AnomalyMap stage_abnormal_map(const PatchFeatureGrid& grid, const ProjectionHead& head,
                              const TextFeatureMatrix& ft, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("stage_abnormal_map: tau must be positive");
    if (head.weight.cols() != ft.rows.cols())
        throw std::invalid_argument("stage_abnormal_map: head/text width mismatch");
    const RowMatrixD u = project_stage_features(grid, head);
    const Eigen::VectorXd t0 = ft.rows.row(0).cast<double>();
    const Eigen::VectorXd t1 = ft.rows.row(1).cast<double>();

    AnomalyMap map(grid.h, grid.w, AnomalyMap::Resolution::PatchGrid);
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        const double l0 = u.row(r).dot(t0) / tau;
        const double l1 = u.row(r).dot(t1) / tau;
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        map.v[static_cast<size_t>(r)] = e1 / (e0 + e1);
    }
    return map;
}

AnomalyMap compute_anomaly_map(const std::vector<PatchFeatureGrid>& grids,
                               const std::vector<ProjectionHead>& heads,
                               const TextFeatureMatrix& ft, double tau, int out_side) {
    if (grids.empty()) throw std::invalid_argument("compute_anomaly_map: no stages");
    if (grids.size() != heads.size())
        throw std::invalid_argument("compute_anomaly_map: need one head per grid");
    if (out_side <= 0) throw std::invalid_argument("compute_anomaly_map: bad output side");

    AnomalyMap out(out_side, out_side, AnomalyMap::Resolution::Image);
    std::vector<double> upsampled(out.v.size());
    for (size_t s = 0; s < grids.size(); ++s) {
        if (grids[s].stage != heads[s].stage)
            throw std::invalid_argument("compute_anomaly_map: grid/head stage mismatch at " +
                                        std::to_string(s));
        const AnomalyMap stage = stage_abnormal_map(grids[s], heads[s], ft, tau);
        BilinearPlan plan(stage.h, stage.w, out_side, out_side);
        plan.apply(stage.v.data(), upsampled.data());
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += upsampled[i];
    }
    return out;
}

double focal_loss(const AnomalyMap& pred, const BinaryMask& mask, double gamma, double alpha) {
    check_pred_mask(pred, mask, "focal_loss");
    double sum = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double p = std::clamp(pred.v[i], kProbEps, 1.0 - kProbEps);
        const double pt = mask.v[i] ? p : 1.0 - p;
        sum += -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    return sum / static_cast<double>(pred.v.size());
}

double dice_loss(const AnomalyMap& pred, const BinaryMask& mask, double smooth) {
    check_pred_mask(pred, mask, "dice_loss");
    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double p = std::clamp(pred.v[i], kProbEps, 1.0 - kProbEps);
        psum += p;
        if (mask.v[i]) {
            inter += p;
            gsum += 1.0;
        }
    }
    return 1.0 - (2.0 * inter + smooth) / (psum + gsum + smooth);
}

void HeadGradients::init_like(const std::vector<ProjectionHead>& heads) {
    dweight.clear();
    dbias.clear();
    for (const auto& h : heads) {
        dweight.push_back(RowMatrixD::Zero(h.weight.rows(), h.weight.cols()));
        dbias.push_back(Eigen::VectorXd::Zero(h.bias.size()));
    }
}

void HeadGradients::scale(double s) {
    for (auto& w : dweight) w *= s;
    for (auto& b : dbias) b *= s;
}

void HeadGradients::accumulate(const HeadGradients& other) {
    for (size_t i = 0; i < dweight.size(); ++i) {
        dweight[i] += other.dweight[i];
        dbias[i] += other.dbias[i];
    }
}

double head_loss_and_grad(const std::vector<PatchFeatureGrid>& grids,
                          const std::vector<ProjectionHead>& heads,
                          const TextFeatureMatrix& ft, const BinaryMask& mask,
                          const TrainConfig& cfg, HeadGradients* grads) {
    if (grids.empty()) throw std::invalid_argument("head_loss_and_grad: no stages");
    if (grids.size() != heads.size())
        throw std::invalid_argument("head_loss_and_grad: need one head per grid");
    const int side = mask.h;
    if (mask.w != side || side <= 0)
        throw std::invalid_argument("head_loss_and_grad: mask must be square");
    const double tau = cfg.temperature;
    if (!(tau > 0.0)) throw std::invalid_argument("head_loss_and_grad: tau must be positive");

    const size_t n_stages = grids.size();
    const size_t n_px = static_cast<size_t>(side) * side;
    const Eigen::VectorXd t0 = ft.rows.row(0).cast<double>();
    const Eigen::VectorXd t1 = ft.rows.row(1).cast<double>();

    // forward, keeping what backward needs
    struct StageState {
        RowMatrixD x;             // inputs, P x C_s
        RowMatrixD u;             // normalized projections, P x C
        Eigen::VectorXd norms;    // pre-normalization row norms
        Eigen::VectorXd abnormal; // softmax abnormal channel per patch
        BilinearPlan plan;
        StageState(int in_h, int in_w, int out) : plan(in_h, in_w, out, out) {}
    };

    std::vector<StageState> states;
    states.reserve(n_stages);
    std::vector<double> summed(n_px, 0.0);
    std::vector<double> upsampled(n_px);

    for (size_t s = 0; s < n_stages; ++s) {
        const PatchFeatureGrid& g = grids[s];
        StageState st(g.h, g.w, side);
        st.x = g.feat.cast<double>();
        RowMatrixD z = st.x * heads[s].weight;
        z.rowwise() += heads[s].bias.transpose();
        st.norms.resize(z.rows());
        st.u.resize(z.rows(), z.cols());
        st.abnormal.resize(z.rows());
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            st.norms[r] = std::max(z.row(r).norm(), kNormFloor);
            st.u.row(r) = z.row(r) / st.norms[r];
            const double l0 = st.u.row(r).dot(t0) / tau;
            const double l1 = st.u.row(r).dot(t1) / tau;
            const double m = std::max(l0, l1);
            const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
            st.abnormal[r] = e1 / (e0 + e1);
        }
        st.plan.apply(st.abnormal.data(), upsampled.data());
        for (size_t i = 0; i < n_px; ++i) summed[i] += upsampled[i];
        states.push_back(std::move(st));
    }

    // probability target: stage sum / num_stages, then clip
    const double inv_stages = 1.0 / static_cast<double>(n_stages);
    std::vector<double> prob(n_px);
    std::vector<bool> clipped(n_px);
    for (size_t i = 0; i < n_px; ++i) {
        const double raw = summed[i] * inv_stages;
        prob[i] = std::clamp(raw, kProbEps, 1.0 - kProbEps);
        clipped[i] = raw < kProbEps || raw > 1.0 - kProbEps;
    }

    double focal_sum = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
    for (size_t i = 0; i < n_px; ++i) {
        const double p = prob[i];
        const double pt = mask.v[i] ? p : 1.0 - p;
        focal_sum += -cfg.focal_alpha * std::pow(1.0 - pt, cfg.focal_gamma) * std::log(pt);
        psum += p;
        if (mask.v[i]) {
            inter += p;
            gsum += 1.0;
        }
    }
    const double focal = focal_sum / static_cast<double>(n_px);
    const double dice_den = psum + gsum + cfg.dice_smooth;
    const double dice_num = 2.0 * inter + cfg.dice_smooth;
    const double dice = 1.0 - dice_num / dice_den;
    const double loss = cfg.focal_weight * focal + cfg.dice_weight * dice;
    if (!grads) return loss;

    // d loss / d prob
    std::vector<double> dprob(n_px);
    const double inv_npx = 1.0 / static_cast<double>(n_px);
    for (size_t i = 0; i < n_px; ++i) {
        const double p = prob[i];
        const int y = mask.v[i];
        const double pt = y ? p : 1.0 - p;
        const double sign = y ? 1.0 : -1.0;
        double dfocal_dpt = -cfg.focal_alpha * std::pow(1.0 - pt, cfg.focal_gamma) / pt;
        if (cfg.focal_gamma != 0.0)
            dfocal_dpt += cfg.focal_alpha * cfg.focal_gamma *
                          std::pow(1.0 - pt, cfg.focal_gamma - 1.0) * std::log(pt);
        const double ddice_dp = -(2.0 * (y ? 1.0 : 0.0) * dice_den - dice_num) /
                                (dice_den * dice_den);
        double g = cfg.focal_weight * dfocal_dpt * sign * inv_npx + cfg.dice_weight * ddice_dp;
        dprob[i] = clipped[i] ? 0.0 : g * inv_stages;  // through /num_stages and the clip
    }

    grads->init_like(heads);
    for (size_t s = 0; s < n_stages; ++s) {
        StageState& st = states[s];
        const Eigen::Index n_patches = st.u.rows();

        // adjoint of the bilinear upsampling back to the patch grid
        std::vector<double> da(static_cast<size_t>(n_patches), 0.0);
        st.plan.apply_adjoint(dprob.data(), da.data());

        RowMatrixD dz(n_patches, st.u.cols());
        for (Eigen::Index r = 0; r < n_patches; ++r) {
            const double a = st.abnormal[r];
            const double dl1 = da[static_cast<size_t>(r)] * a * (1.0 - a);
            // two-class softmax: dl0 = -dl1
            Eigen::VectorXd du = (dl1 * (t1 - t0)) / tau;
            const double udotdu = st.u.row(r).dot(du);
            dz.row(r) = (du.transpose() - udotdu * st.u.row(r)) / st.norms[r];
        }
        grads->dweight[s].noalias() = st.x.transpose() * dz;
        grads->dbias[s] = dz.colwise().sum().transpose();
    }
    return loss;
}

std::vector<ProjectionHead> init_heads(const BackboneSpec& spec, uint64_t seed) {
    std::vector<ProjectionHead> heads;
    Rng rng(hash_combine(seed, 0x68656164ULL));  // dedicated head-init stream
    for (int s = 1; s <= spec.num_stages(); ++s) {
        ProjectionHead h;
        h.stage = s;
        h.weight.resize(spec.internal_width, spec.joint_width);
        for (Eigen::Index r = 0; r < h.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < h.weight.cols(); ++c)
                h.weight(r, c) = 0.01 * rng.next_gaussian();
        h.bias = Eigen::VectorXd::Zero(spec.joint_width);
        heads.push_back(std::move(h));
    }
    return heads;
}

void save_heads(const std::string& path, const std::vector<ProjectionHead>& heads) {
    if (heads.empty()) throw std::invalid_argument("save_heads: no heads");
    TensorFileWriter writer;
    for (const auto& h : heads) {
        const std::string prefix = "head.stage" + std::to_string(h.stage);
        std::vector<float> w(static_cast<size_t>(h.weight.size()));
        Eigen::Map<RowMatrixF>(w.data(), h.weight.rows(), h.weight.cols()) =
            h.weight.cast<float>();
        writer.add(prefix + ".weight", {h.weight.rows(), h.weight.cols()}, w);
        std::vector<float> b(static_cast<size_t>(h.bias.size()));
        Eigen::Map<Eigen::VectorXf>(b.data(), h.bias.size()) = h.bias.cast<float>();
        writer.add(prefix + ".bias", {h.bias.size()}, b);
    }
    writer.set_meta({{"kind", "projection_heads"}, {"stages", heads.size()}});
    writer.write(path);
}

std::vector<ProjectionHead> load_heads(const std::string& path, const BackboneSpec& spec) {
    TensorFileReader reader(path);
    std::vector<ProjectionHead> heads;
    for (int s = 1; s <= spec.num_stages(); ++s) {
        const std::string prefix = "head.stage" + std::to_string(s);
        if (!reader.has(prefix + ".weight") || !reader.has(prefix + ".bias"))
            throw std::runtime_error("head checkpoint '" + path + "' lacks stage " +
                                     std::to_string(s) + " expected by the backbone spec");
        const TensorInfo& wi = reader.info(prefix + ".weight");
        if (wi.shape.size() != 2 || wi.shape[0] != spec.internal_width ||
            wi.shape[1] != spec.joint_width)
            throw std::runtime_error("head checkpoint '" + path + "': stage " +
                                     std::to_string(s) + " weight shape mismatch");
        const TensorInfo& bi = reader.info(prefix + ".bias");
        if (bi.shape.size() != 1 || bi.shape[0] != spec.joint_width)
            throw std::runtime_error("head checkpoint '" + path + "': stage " +
                                     std::to_string(s) + " bias shape mismatch");

        ProjectionHead h;
        h.stage = s;
        std::vector<float> w = reader.read(prefix + ".weight");
        h.weight = Eigen::Map<const RowMatrixF>(w.data(), spec.internal_width, spec.joint_width)
                       .cast<double>();
        std::vector<float> b = reader.read(prefix + ".bias");
        h.bias = Eigen::Map<const Eigen::VectorXf>(b.data(), spec.joint_width).cast<double>();
        heads.push_back(std::move(h));
    }
    // reject checkpoints carrying extra stages beyond the spec
    if (reader.has("head.stage" + std::to_string(spec.num_stages() + 1) + ".weight"))
        throw std::runtime_error("head checkpoint '" + path + "' has more stages than the spec");
    return heads;
}

}  // namespace adkit
