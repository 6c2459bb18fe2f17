#pragma once

#include <string>
#include <utility>
#include <vector>

#include "adkit/types.hpp"

namespace adkit {

/// Paired scores and binary labels for threshold metrics.
struct LabeledScores {
    std::vector<double> scores;
    std::vector<int> labels;  // 0 or 1

    size_t size() const { return scores.size(); }
    void push_back(double s, int y) {
        scores.push_back(s);
        labels.push_back(y);
    }
};

struct F1MaxResult {
    double f1 = 0.0;
    double threshold = 0.0;
};

/// F1 at the best threshold. Candidates are the unique observed scores plus
/// +inf (predict none); prediction is score >= t. Ties resolve to the smallest
/// optimal threshold. Throws if there is no positive label.
F1MaxResult f1_max(const LabeledScores& data);

/// Mann-Whitney AUROC: (wins + 0.5 * ties) / (P * N). Throws unless both
/// classes are present.
double auroc(const LabeledScores& data);

/// AP over the descending-score ranking, ties kept in original index order.
/// Throws if there is no positive label.
double average_precision(const LabeledScores& data);

/// 8-connected component labeling of a binary mask. Returns (labels, count)
/// with labels in [0, count) for mask=1 pixels and -1 elsewhere.
std::pair<std::vector<int>, int> connected_components(const BinaryMask& mask);

/// Per-region-overlap: mean connected-component recall integrated over the
/// global-FPR axis for FPR in [0, fpr_limit], normalized by fpr_limit.
/// Thresholds are the unique observed scores (prediction = score >= t); the
/// curve starts at (0, 0) for the empty prediction and is integrated as a
/// left step function, so a map identical to the masks scores exactly 1.
/// Throws if every mask is empty or no negative pixel exists.
double pro(const std::vector<AnomalyMap>& maps, const std::vector<BinaryMask>& masks,
           double fpr_limit = 0.3);

// ---------------------------------------------------------------------------
// challenge summary
// ---------------------------------------------------------------------------

struct ClsMetrics {
    double auroc = 0.0;
    double f1max = 0.0;
    double ap = 0.0;
};

struct SegMetrics {
    double auroc = 0.0;
    double f1max = 0.0;
    double ap = 0.0;
    double pro = 0.0;
};

struct CategoryMetrics {
    double auroc_segm = 0.0;
    double f1max_segm = 0.0;
    double ap_segm = 0.0;
    double pro_segm = 0.0;
    double auroc_cls = 0.0;
    double f1max_cls = 0.0;
    double ap_cls = 0.0;
    double harmonic = 0.0;  // 2ab/(a+b) of the two F1-max values
};

struct MetricReport {
    std::vector<std::pair<std::string, CategoryMetrics>> categories;
    CategoryMetrics mean;  // arithmetic mean over categories
};

/// 2ab/(a+b), defined as 0 when either input is 0.
double harmonic_mean(double a, double b);

/// Joins per-category classification and segmentation results into a report.
/// Both sides must cover the same category set (order taken from cls).
MetricReport summarize(const std::vector<std::pair<std::string, ClsMetrics>>& cls,
                       const std::vector<std::pair<std::string, SegMetrics>>& seg);

/// Report files: nested JSON and a CSV with one row per category plus MEAN,
/// columns category, auroc_segm, f1max_segm, ap_segm, pro_segm, auroc_cls,
/// f1max_cls, ap_cls, harmonic.
void write_report_json(const MetricReport& report, const std::string& path);
void write_report_csv(const MetricReport& report, const std::string& path);

}  // namespace adkit
