#pragma once

#include <string>
#include <vector>

#include "adkit/backbone.hpp"
#include "adkit/types.hpp"

namespace adkit {

/// All L2-normalized reference patch features of one stage. No deduplication:
/// k reference images give k * h * w entries.
struct MemoryBank {
    int stage = 0;
    RowMatrixD entries;  // E x C_s, unit rows
    int source_count = 0;
};

struct FewShotResult {
    AnomalyMap map_f;
    AnomalyMap fused_map;
    double image_score = 0.0;
};

/// Extracts every stage of every reference image and stores the normalized
/// patch features. Projection heads are not touched.
std::vector<MemoryBank> build_memory_banks(const std::vector<ImageTensor>& reference_images,
                                           const Backbone& backbone);

/// M_f(i,j) = sum over stages of min over bank entries of (1 - cos). Test
/// features are L2-normalized before comparison; cosines are accumulated
/// sequentially in double over the feature dimension, so small instances
/// reproduce a naive scan bit for bit. Per-stage maps are bilinearly
/// upsampled to out_side before the stage sum.
AnomalyMap score_few_shot_map(const std::vector<PatchFeatureGrid>& grids,
                              const std::vector<MemoryBank>& banks, int out_side);

/// Elementwise sum at equal resolution; optional per-map min-max
/// normalization first (off by default).
AnomalyMap fuse_maps(const AnomalyMap& m_zero, const AnomalyMap& m_few,
                     bool normalize_each = false);

/// text_score + max of the fused map.
double classify_few_shot(double text_score, const AnomalyMap& fused_map);

/// ADKH1 round trip (one tensor per stage, "bank.stage{n}").
void save_banks(const std::string& path, const std::vector<MemoryBank>& banks);
std::vector<MemoryBank> load_banks(const std::string& path, const BackboneSpec& spec);

}  // namespace adkit
