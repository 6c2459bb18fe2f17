#include "adkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace adkit {

namespace {

void check_nonempty(const LabeledScores& data, const char* op) {
    if (data.scores.empty()) throw std::invalid_argument(std::string(op) + ": empty input");
    if (data.scores.size() != data.labels.size())
        throw std::invalid_argument(std::string(op) + ": scores/labels length mismatch");
}

std::vector<size_t> order_by_score_desc_stable(const LabeledScores& data) {
    std::vector<size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return data.scores[a] > data.scores[b]; });
    return idx;
}

}  // namespace

F1MaxResult f1_max(const LabeledScores& data) {
    check_nonempty(data, "f1_max");
    long long total_pos = 0;
    for (int y : data.labels) total_pos += y;
    if (total_pos == 0) throw std::invalid_argument("f1_max: no positive labels");

    const auto idx = order_by_score_desc_stable(data);

    // F1 = 2TP / (2TP + FP + FN) = 2TP / (TP + FP + P); sweep thresholds
    // descending and keep >= so ties settle on the smallest threshold.
    F1MaxResult best{0.0, std::numeric_limits<double>::infinity()};
    long long tp = 0, fp = 0;
    size_t i = 0;
    while (i < idx.size()) {
        const double t = data.scores[idx[i]];
        while (i < idx.size() && data.scores[idx[i]] == t) {
            if (data.labels[idx[i]]) ++tp; else ++fp;
            ++i;
        }
        const double f1 =
            2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + total_pos);
        if (f1 >= best.f1) best = {f1, t};
    }
    return best;
}

double auroc(const LabeledScores& data) {
    check_nonempty(data, "auroc");
    long long pos = 0;
    for (int y : data.labels) pos += y;
    const long long neg = static_cast<long long>(data.size()) - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("auroc: needs both classes");

    // rank-sum with mid-ranks for ties, ascending order
    std::vector<size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return data.scores[a] < data.scores[b]; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j < idx.size() && data.scores[idx[j]] == data.scores[idx[i]]) ++j;
        const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (data.labels[idx[k]]) rank_sum_pos += mid_rank;
        i = j;
    }
    const double u =
        rank_sum_pos - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1.0);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const LabeledScores& data) {
    check_nonempty(data, "average_precision");
    long long total_pos = 0;
    for (int y : data.labels) total_pos += y;
    if (total_pos == 0) throw std::invalid_argument("average_precision: no positive labels");

    const auto idx = order_by_score_desc_stable(data);
    double sum = 0.0;
    long long tp = 0;
    for (size_t k = 0; k < idx.size(); ++k) {
        if (data.labels[idx[k]]) {
            ++tp;
            sum += static_cast<double>(tp) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(total_pos);
}

std::pair<std::vector<int>, int> connected_components(const BinaryMask& mask) {
    std::vector<int> labels(mask.v.size(), -1);
    int count = 0;
    std::vector<int> stack;
    for (int r = 0; r < mask.h; ++r) {
        for (int c = 0; c < mask.w; ++c) {
            const int start = r * mask.w + c;
            if (!mask.v[start] || labels[start] >= 0) continue;
            labels[start] = count;
            stack.push_back(start);
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int pr = p / mask.w, pc = p % mask.w;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = pr + dr, nc = pc + dc;
                        if (nr < 0 || nr >= mask.h || nc < 0 || nc >= mask.w) continue;
                        const int q = nr * mask.w + nc;
                        if (mask.v[q] && labels[q] < 0) {
                            labels[q] = count;
                            stack.push_back(q);
                        }
                    }
                }
            }
            ++count;
        }
    }
    return {std::move(labels), count};
}

double pro(const std::vector<AnomalyMap>& maps, const std::vector<BinaryMask>& masks,
           double fpr_limit) {
    if (maps.empty() || maps.size() != masks.size())
        throw std::invalid_argument("pro: maps/masks mismatch");
    if (!(fpr_limit > 0.0 && fpr_limit <= 1.0))
        throw std::invalid_argument("pro: fpr_limit must be in (0,1]");

    struct Pixel {
        double score;
        int component;  // global component id, -1 for negatives
    };

    std::vector<Pixel> pixels;
    std::vector<long long> comp_size;
    long long total_neg = 0;
    for (size_t i = 0; i < maps.size(); ++i) {
        const AnomalyMap& m = maps[i];
        const BinaryMask& g = masks[i];
        if (m.h != g.h || m.w != g.w)
            throw std::invalid_argument("pro: map/mask shape mismatch at index " +
                                        std::to_string(i));
        auto [labels, count] = connected_components(g);
        const int base = static_cast<int>(comp_size.size());
        for (int c = 0; c < count; ++c) comp_size.push_back(0);
        for (size_t p = 0; p < m.v.size(); ++p) {
            const int comp = labels[p] >= 0 ? base + labels[p] : -1;
            if (comp >= 0)
                ++comp_size[comp];
            else
                ++total_neg;
            pixels.push_back({m.v[p], comp});
        }
    }
    if (comp_size.empty()) throw std::invalid_argument("pro: all masks are empty");
    if (total_neg == 0) throw std::invalid_argument("pro: no negative pixels");

    std::sort(pixels.begin(), pixels.end(),
              [](const Pixel& a, const Pixel& b) { return a.score > b.score; });

    // Walk unique scores descending; each step adds the tied pixels and yields
    // one (fpr, pro) curve point. Integrate pro over fpr as a left step
    // function starting from (0, 0), clipped at fpr_limit.
    const double n_comp = static_cast<double>(comp_size.size());
    double sum_recall = 0.0;  // sum over components of hits/size
    std::vector<long long> hits(comp_size.size(), 0);
    long long fp = 0;
    long long full = 0;  // components recalled completely

    double area = 0.0;
    double prev_fpr = 0.0, prev_pro = 0.0;
    size_t i = 0;
    while (i < pixels.size()) {
        const double t = pixels[i].score;
        while (i < pixels.size() && pixels[i].score == t) {
            const int comp = pixels[i].component;
            if (comp >= 0) {
                ++hits[comp];
                sum_recall += 1.0 / static_cast<double>(comp_size[comp]);
                if (hits[comp] == comp_size[comp]) ++full;
            } else {
                ++fp;
            }
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(total_neg);
        // exact 1.0 once every component is fully recalled; the incremental
        // sum would otherwise carry rounding from the 1/size terms
        const double cur_pro =
            full == static_cast<long long>(comp_size.size()) ? 1.0 : sum_recall / n_comp;
        if (fpr >= fpr_limit) {
            area += (fpr_limit - prev_fpr) * prev_pro;
            return area / fpr_limit;
        }
        area += (fpr - prev_fpr) * prev_pro;
        prev_fpr = fpr;
        prev_pro = cur_pro;
    }
    // the lowest threshold predicts everything, so fpr reaches 1 >= fpr_limit
    area += (fpr_limit - prev_fpr) * prev_pro;
    return area / fpr_limit;
}

double harmonic_mean(double a, double b) {
    if (a <= 0.0 || b <= 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

MetricReport summarize(const std::vector<std::pair<std::string, ClsMetrics>>& cls,
                       const std::vector<std::pair<std::string, SegMetrics>>& seg) {
    if (cls.size() != seg.size())
        throw std::invalid_argument("summarize: category count mismatch");
    MetricReport report;
    for (const auto& [name, c] : cls) {
        auto it = std::find_if(seg.begin(), seg.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == seg.end())
            throw std::invalid_argument("summarize: category '" + name +
                                        "' missing on segmentation side");
        const SegMetrics& s = it->second;
        CategoryMetrics m;
        m.auroc_segm = s.auroc;
        m.f1max_segm = s.f1max;
        m.ap_segm = s.ap;
        m.pro_segm = s.pro;
        m.auroc_cls = c.auroc;
        m.f1max_cls = c.f1max;
        m.ap_cls = c.ap;
        m.harmonic = harmonic_mean(c.f1max, s.f1max);
        report.categories.emplace_back(name, m);
    }

    const double n = static_cast<double>(report.categories.size());
    CategoryMetrics& mean = report.mean;
    for (const auto& [name, m] : report.categories) {
        mean.auroc_segm += m.auroc_segm / n;
        mean.f1max_segm += m.f1max_segm / n;
        mean.ap_segm += m.ap_segm / n;
        mean.pro_segm += m.pro_segm / n;
        mean.auroc_cls += m.auroc_cls / n;
        mean.f1max_cls += m.f1max_cls / n;
        mean.ap_cls += m.ap_cls / n;
        mean.harmonic += m.harmonic / n;
    }
    return report;
}

namespace {

nlohmann::json metrics_to_json(const CategoryMetrics& m) {
    return {{"auroc_segm", m.auroc_segm}, {"f1max_segm", m.f1max_segm},
            {"ap_segm", m.ap_segm},       {"pro_segm", m.pro_segm},
            {"auroc_cls", m.auroc_cls},   {"f1max_cls", m.f1max_cls},
            {"ap_cls", m.ap_cls},         {"harmonic", m.harmonic}};
}

}  // namespace

void write_report_json(const MetricReport& report, const std::string& path) {
    nlohmann::json j;
    j["categories"] = nlohmann::json::object();
    for (const auto& [name, m] : report.categories) j["categories"][name] = metrics_to_json(m);
    j["mean"] = metrics_to_json(report.mean);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report to " + path);
    out << j.dump(2) << "\n";
}

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report to " + path);
    out << "category,auroc_segm,f1max_segm,ap_segm,pro_segm,auroc_cls,f1max_cls,ap_cls,"
           "harmonic\n";
    auto row = [&](const std::string& name, const CategoryMetrics& m) {
        char buf[320];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      name.c_str(), m.auroc_segm, m.f1max_segm, m.ap_segm, m.pro_segm,
                      m.auroc_cls, m.f1max_cls, m.ap_cls, m.harmonic);
        out << buf;
    };
    for (const auto& [name, m] : report.categories) row(name, m);
    row("MEAN", report.mean);
}

}  // namespace adkit
