#pragma once

#include <string>
#include <vector>

#include "adkit/backbone.hpp"
#include "adkit/prompts.hpp"
#include "adkit/types.hpp"

namespace adkit {

/// Per-stage linear map into the joint space: projected = row * weight + bias.
struct ProjectionHead {
    int stage = 0;
    RowMatrixD weight;     // C_s x C
    Eigen::VectorXd bias;  // C
};

struct ScorePair {
    double normal_prob = 0.0;
    double abnormal_prob = 0.0;
};

struct TrainConfig {
    int epochs = 3;
    int batch_size = 16;
    double learning_rate = 1e-3;
    int image_side = 518;
    double mosaic_prob = 0.2;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    double dice_smooth = 1.0;
    double focal_weight = 1.0;
    double dice_weight = 1.0;
    double temperature = 0.01;
    uint64_t seed = 0;

    void validate() const;
};

/// softmax(fc . ft^T / tau); abnormal_prob is the image anomaly score.
ScorePair classify_zero_shot(const ClassEmbedding& fc, const TextFeatureMatrix& ft, double tau);

/// Affine map of every patch row followed by L2 row normalization.
RowMatrixD project_stage_features(const PatchFeatureGrid& grid, const ProjectionHead& head);

/// One stage's abnormal-probability map at native patch resolution. The
/// normal and abnormal channels sum to 1 per pixel.
AnomalyMap stage_abnormal_map(const PatchFeatureGrid& grid, const ProjectionHead& head,
                              const TextFeatureMatrix& ft, double tau);

/// Per-stage projection and two-class softmax, bilinear upsampling of every
/// stage map to out_side, then the stage sum. Values lie in [0, num_stages].
AnomalyMap compute_anomaly_map(const std::vector<PatchFeatureGrid>& grids,
                               const std::vector<ProjectionHead>& heads,
                               const TextFeatureMatrix& ft, double tau, int out_side);

/// Mean over pixels of -alpha * (1-p_t)^gamma * log(p_t); predictions are
/// clipped to [eps, 1-eps] with eps = 1e-7.
double focal_loss(const AnomalyMap& pred, const BinaryMask& mask, double gamma, double alpha);

/// 1 - (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth).
double dice_loss(const AnomalyMap& pred, const BinaryMask& mask, double smooth);

/// Gradient buffers matching a head list.
struct HeadGradients {
    std::vector<RowMatrixD> dweight;
    std::vector<Eigen::VectorXd> dbias;

    void init_like(const std::vector<ProjectionHead>& heads);
    void scale(double s);
    void accumulate(const HeadGradients& other);
};

/// Loss of the supervised map (stage sum / num_stages against the mask at
/// mask resolution) plus, when grads is non-null, analytic gradients for
/// every head entry. This is the exact path train_heads optimizes.
double head_loss_and_grad(const std::vector<PatchFeatureGrid>& grids,
                          const std::vector<ProjectionHead>& heads,
                          const TextFeatureMatrix& ft, const BinaryMask& mask,
                          const TrainConfig& cfg, HeadGradients* grads);

/// weight ~ N(0, 0.01^2) from the seed, bias = 0.
std::vector<ProjectionHead> init_heads(const BackboneSpec& spec, uint64_t seed);

/// ADKH1 round trip; load validates shapes against the spec.
void save_heads(const std::string& path, const std::vector<ProjectionHead>& heads);
std::vector<ProjectionHead> load_heads(const std::string& path, const BackboneSpec& spec);

}  // namespace adkit
