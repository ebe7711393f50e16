#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hg/detector.hpp"

namespace hg {

struct MetricsRow {
    double tpr = 0, fpr = 0, acc = 0, f1 = 0;
    double auroc = 0, auprc = 0, tpr_at_fpr1 = 0;
    double time_per_query_us = 0;
    std::string tag;
    int n_pos = 0, n_neg = 0;

    // Table column order: TPR, FPR, ACC, F1, AUROC, AUPRC, TPR@FPR1%, time.
    static std::string csv_header();
    std::string csv_line() const;
};

// Thresholded confusion metrics at tau plus rank-based AUROC (ties counted
// half), step-integrated AUPRC (right-continuous, no interpolation) and
// TPR@FPR<=1% over achievable operating points. Scores are (value, is_nsfw).
MetricsRow compute_metrics(const std::vector<std::pair<double, bool>>& scores, double tau);

struct CurvePoint {
    double threshold;
    double x;  // FPR (roc) or recall (pr)
    double y;  // TPR (roc) or precision (pr)
};

std::vector<CurvePoint> roc_points(const std::vector<std::pair<double, bool>>& scores);
std::vector<CurvePoint> pr_points(const std::vector<std::pair<double, bool>>& scores);
std::string curve_csv(const std::vector<CurvePoint>& points, const std::string& x_name,
                      const std::string& y_name);

struct SweepRow {
    int size = 0;
    uint64_t seed = 0;
    MetricsRow metrics;
};

// Class-balanced subsample of `size` records (half benign, half NSFW), bank
// trained and calibrated on the subsample, evaluated on the held-out
// remainder. One row per (size, seed).
std::vector<SweepRow> size_sweep(const EncoderModel& model,
                                 const std::vector<PromptRecord>& records,
                                 const std::vector<int>& sizes,
                                 const std::vector<uint64_t>& seeds,
                                 const BpeVocab* vocab = nullptr);

struct LatencyReport {
    double encode_us_median = 0;
    double score_us_median = 0;
    int samples = 0;
};

LatencyReport bench_latency(const EncoderModel& model, const FeatureBank& bank,
                            const std::vector<TokenSequence>& prompts, int warmup, int iters);

}  // namespace hg
