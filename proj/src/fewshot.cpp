#include "adkit/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adkit/checkpoint.hpp"
#include "adkit/interp.hpp"

namespace adkit {

namespace {

constexpr double kNormFloor = 1e-30;

// Sequential double accumulation; keep this the single dot-product used for
// bank scoring so a naive reference scan matches exactly.
double dot_seq(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

RowMatrixD normalized_rows(const RowMatrixF& feat) {
    RowMatrixD out(feat.rows(), feat.cols());
    for (Eigen::Index r = 0; r < feat.rows(); ++r) {
        double sq = 0.0;
        for (Eigen::Index c = 0; c < feat.cols(); ++c) {
            const double v = static_cast<double>(feat(r, c));
            out(r, c) = v;
            sq += v * v;
        }
        const double inv = 1.0 / std::max(std::sqrt(sq), kNormFloor);
        out.row(r) *= inv;
    }
    return out;
}

}  // namespace

std::vector<MemoryBank> build_memory_banks(const std::vector<ImageTensor>& reference_images,
                                           const Backbone& backbone) {
    if (reference_images.empty())
        throw std::invalid_argument("build_memory_banks: need at least one reference image");

    std::vector<MemoryBank> banks;
    for (size_t n = 0; n < reference_images.size(); ++n) {
        BackboneOutput out = backbone.extract(reference_images[n]);
        if (n == 0) {
            banks.resize(out.grids.size());
            for (size_t s = 0; s < out.grids.size(); ++s) banks[s].stage = out.grids[s].stage;
        } else if (out.grids.size() != banks.size()) {
            throw std::runtime_error("build_memory_banks: stage count changed between references");
        }
        for (size_t s = 0; s < out.grids.size(); ++s) {
            RowMatrixD rows = normalized_rows(out.grids[s].feat);
            MemoryBank& bank = banks[s];
            if (bank.entries.rows() == 0) {
                bank.entries = std::move(rows);
            } else {
                if (rows.cols() != bank.entries.cols())
                    throw std::runtime_error("build_memory_banks: feature width mismatch");
                const Eigen::Index old = bank.entries.rows();
                bank.entries.conservativeResize(old + rows.rows(), Eigen::NoChange);
                bank.entries.bottomRows(rows.rows()) = rows;
            }
        }
    }
    for (MemoryBank& bank : banks) bank.source_count = static_cast<int>(reference_images.size());
    return banks;
}

AnomalyMap score_few_shot_map(const std::vector<PatchFeatureGrid>& grids,
                              const std::vector<MemoryBank>& banks, int out_side) {
    if (grids.empty()) throw std::invalid_argument("score_few_shot_map: no stage grids");
    if (grids.size() != banks.size())
        throw std::invalid_argument("score_few_shot_map: stage count mismatch between grids and banks");
    if (out_side <= 0) throw std::invalid_argument("score_few_shot_map: out_side must be positive");

    AnomalyMap total(out_side, out_side, AnomalyMap::Resolution::Image);

    for (size_t s = 0; s < grids.size(); ++s) {
        const PatchFeatureGrid& grid = grids[s];
        const MemoryBank& bank = banks[s];
        if (grid.stage != bank.stage)
            throw std::invalid_argument("score_few_shot_map: stage id mismatch at position " +
                                        std::to_string(s));
        if (bank.entries.rows() == 0)
            throw std::invalid_argument("score_few_shot_map: empty bank for stage " +
                                        std::to_string(bank.stage));
        if (grid.feat.cols() != bank.entries.cols())
            throw std::invalid_argument("score_few_shot_map: feature width mismatch for stage " +
                                        std::to_string(bank.stage));

        const RowMatrixD test = normalized_rows(grid.feat);
        const int num_px = static_cast<int>(test.rows());
        const int num_entries = static_cast<int>(bank.entries.rows());
        const int dim = static_cast<int>(test.cols());

        std::vector<double> best(num_px, std::numeric_limits<double>::infinity());
        // Tile over bank entries so a block stays cache-resident while all
        // pixels stream past it. min across tiles is order-independent.
        constexpr int kTile = 64;
        for (int e0 = 0; e0 < num_entries; e0 += kTile) {
            const int e1 = std::min(e0 + kTile, num_entries);
            for (int p = 0; p < num_px; ++p) {
                const double* tp = test.row(p).data();
                double b = best[p];
                for (int e = e0; e < e1; ++e) {
                    const double cos = dot_seq(tp, bank.entries.row(e).data(), dim);
                    const double dist = 1.0 - cos;
                    if (dist < b) b = dist;
                }
                best[p] = b;
            }
        }

        BilinearPlan plan(grid.h, grid.w, out_side, out_side);
        std::vector<double> up(static_cast<size_t>(out_side) * out_side, 0.0);
        plan.apply(best.data(), up.data());
        for (size_t i = 0; i < total.v.size(); ++i) total.v[i] += up[i];
    }
    return total;
}

AnomalyMap fuse_maps(const AnomalyMap& m_zero, const AnomalyMap& m_few, bool normalize_each) {
    if (m_zero.h != m_few.h || m_zero.w != m_few.w)
        throw std::invalid_argument("fuse_maps: resolution mismatch (" + std::to_string(m_zero.h) +
                                    "x" + std::to_string(m_zero.w) + " vs " +
                                    std::to_string(m_few.h) + "x" + std::to_string(m_few.w) + ")");
    auto norm_copy = [](const AnomalyMap& m) {
        std::vector<double> v = m.v;
        const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
        const double lo = *lo_it, hi = *hi_it;
        if (hi - lo > 1e-12) {
            for (double& x : v) x = (x - lo) / (hi - lo);
        } else {
            std::fill(v.begin(), v.end(), 0.0);
        }
        return v;
    };

    AnomalyMap out;
    out.h = m_zero.h;
    out.w = m_zero.w;
    out.res = m_zero.res;
    if (normalize_each) {
        std::vector<double> a = norm_copy(m_zero);
        std::vector<double> b = norm_copy(m_few);
        out.v.resize(a.size());
        for (size_t i = 0; i < a.size(); ++i) out.v[i] = a[i] + b[i];
    } else {
        out.v.resize(m_zero.v.size());
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = m_zero.v[i] + m_few.v[i];
    }
    return out;
}

double classify_few_shot(double text_score, const AnomalyMap& fused_map) {
    return text_score + fused_map.max_value();
}

void save_banks(const std::string& path, const std::vector<MemoryBank>& banks) {
    TensorFileWriter writer;
    for (const MemoryBank& bank : banks) {
        std::vector<float> blob(static_cast<size_t>(bank.entries.size()));
        for (Eigen::Index r = 0; r < bank.entries.rows(); ++r)
            for (Eigen::Index c = 0; c < bank.entries.cols(); ++c)
                blob[static_cast<size_t>(r) * bank.entries.cols() + c] =
                    static_cast<float>(bank.entries(r, c));
        writer.add("bank.stage" + std::to_string(bank.stage),
                   {bank.entries.rows(), bank.entries.cols()}, blob);
    }
    nlohmann::json meta;
    meta["kind"] = "memory_banks";
    if (!banks.empty()) meta["source_count"] = banks.front().source_count;
    std::vector<int> stages;
    for (const MemoryBank& bank : banks) stages.push_back(bank.stage);
    meta["stages"] = stages;
    writer.set_meta(meta);
    writer.write(path);
}

std::vector<MemoryBank> load_banks(const std::string& path, const BackboneSpec& spec) {
    TensorFileReader reader(path);
    std::vector<MemoryBank> banks;
    int source_count = 0;
    if (reader.meta().contains("source_count")) source_count = reader.meta()["source_count"].get<int>();
    for (int s = 1; s <= spec.num_stages(); ++s) {
        const std::string name = "bank.stage" + std::to_string(s);
        if (!reader.has(name)) throw CheckpointParseError(path + ": missing tensor " + name, 0);
        const TensorInfo& info = reader.info(name);
        if (info.shape.size() != 2 || info.shape[1] != spec.internal_width)
            throw CheckpointParseError(path + ": tensor " + name + " has unexpected shape", 0);
        const std::vector<float> buf = reader.read(name);
        MemoryBank bank;
        bank.stage = s;
        bank.source_count = source_count;
        bank.entries.resize(info.shape[0], info.shape[1]);
        for (Eigen::Index r = 0; r < bank.entries.rows(); ++r)
            for (Eigen::Index c = 0; c < bank.entries.cols(); ++c)
                bank.entries(r, c) =
                    static_cast<double>(buf[static_cast<size_t>(r) * info.shape[1] + c]);
        banks.push_back(std::move(bank));
    }
    return banks;
}

}  // namespace adkit
