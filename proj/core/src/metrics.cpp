#include "hg/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hg/pipeline.hpp"
#include "hg/rng.hpp"

namespace hg {

namespace {

void require_both_classes(const std::vector<std::pair<double, bool>>& scores) {
    int n_pos = 0, n_neg = 0;
    for (const auto& [s, y] : scores) (y ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw class_missing_error("metrics: both classes required");
}

// Mann-Whitney statistic with midranks; exact (counts and halves only).
double rank_auroc(const std::vector<std::pair<double, bool>>& scores) {
    std::vector<std::pair<double, bool>> s = scores;
    std::sort(s.begin(), s.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const size_t n = s.size();
    double rank_sum_pos = 0.0;
    size_t n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && s[j].first == s[i].first) ++j;
        // Midrank of the tie group [i, j): ranks are 1-based.
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (s[k].second) rank_sum_pos += midrank;
        i = j;
    }
    for (const auto& [v, y] : s) (y ? n_pos : n_neg) += 1;
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Confusion counts walking thresholds from +inf down through each distinct
// score; yields one operating point per threshold plus the all-negative one.
struct Operating {
    double threshold;
    int tp, fp;
};

std::vector<Operating> operating_points(const std::vector<std::pair<double, bool>>& scores) {
    std::vector<std::pair<double, bool>> s = scores;
    std::sort(s.begin(), s.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Operating> out;
    out.push_back({HUGE_VAL, 0, 0});
    int tp = 0, fp = 0;
    size_t i = 0;
    while (i < s.size()) {
        size_t j = i;
        while (j < s.size() && s[j].first == s[i].first) {
            if (s[j].second) ++tp;
            else ++fp;
            ++j;
        }
        out.push_back({s[i].first, tp, fp});
        i = j;
    }
    return out;
}

}  // namespace

std::string MetricsRow::csv_header() {
    return "tag,TPR,FPR,ACC,F1,AUROC,AUPRC,TPR@FPR1%,time_per_query_us,n_pos,n_neg";
}

std::string MetricsRow::csv_line() const {
    std::ostringstream ss;
    ss.precision(10);
    ss << tag << ',' << tpr << ',' << fpr << ',' << acc << ',' << f1 << ',' << auroc << ','
       << auprc << ',' << tpr_at_fpr1 << ',' << time_per_query_us << ',' << n_pos << ',' << n_neg;
    return ss.str();
}

MetricsRow compute_metrics(const std::vector<std::pair<double, bool>>& scores, double tau) {
    require_both_classes(scores);
    MetricsRow row;
    int tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& [s, y] : scores) {
        const bool pred = s >= tau;
        if (pred && y) ++tp;
        else if (pred && !y) ++fp;
        else if (!pred && y) ++fn;
        else ++tn;
    }
    row.n_pos = tp + fn;
    row.n_neg = fp + tn;
    row.tpr = static_cast<double>(tp) / row.n_pos;
    row.fpr = static_cast<double>(fp) / row.n_neg;
    row.acc = static_cast<double>(tp + tn) / (row.n_pos + row.n_neg);
    row.f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    row.auroc = rank_auroc(scores);

    const std::vector<Operating> ops = operating_points(scores);
    // AUPRC: right-continuous steps, area = sum (R_k - R_{k-1}) * P_k.
    double auprc = 0.0;
    double prev_recall = 0.0;
    for (const Operating& op : ops) {
        if (op.tp + op.fp == 0) continue;
        const double recall = static_cast<double>(op.tp) / row.n_pos;
        const double precision = static_cast<double>(op.tp) / (op.tp + op.fp);
        auprc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    row.auprc = auprc;

    double best_tpr = 0.0;
    for (const Operating& op : ops) {
        const double fpr = static_cast<double>(op.fp) / row.n_neg;
        if (fpr <= 0.01) best_tpr = std::max(best_tpr, static_cast<double>(op.tp) / row.n_pos);
    }
    row.tpr_at_fpr1 = best_tpr;
    return row;
}

std::vector<CurvePoint> roc_points(const std::vector<std::pair<double, bool>>& scores) {
    require_both_classes(scores);
    int n_pos = 0, n_neg = 0;
    for (const auto& [s, y] : scores) (y ? n_pos : n_neg) += 1;
    std::vector<CurvePoint> out;
    for (const Operating& op : operating_points(scores))
        out.push_back({op.threshold, static_cast<double>(op.fp) / n_neg,
                       static_cast<double>(op.tp) / n_pos});
    return out;  // thresholds descend, so FPR/TPR ascend
}

std::vector<CurvePoint> pr_points(const std::vector<std::pair<double, bool>>& scores) {
    require_both_classes(scores);
    int n_pos = 0;
    for (const auto& [s, y] : scores) n_pos += y ? 1 : 0;
    std::vector<CurvePoint> out;
    for (const Operating& op : operating_points(scores)) {
        if (op.tp + op.fp == 0) continue;
        out.push_back({op.threshold, static_cast<double>(op.tp) / n_pos,
                       static_cast<double>(op.tp) / (op.tp + op.fp)});
    }
    return out;  // sorted by ascending recall
}

std::string curve_csv(const std::vector<CurvePoint>& points, const std::string& x_name,
                      const std::string& y_name) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "threshold," << x_name << ',' << y_name << '\n';
    for (const CurvePoint& p : points) ss << p.threshold << ',' << p.x << ',' << p.y << '\n';
    return ss.str();
}

std::vector<SweepRow> size_sweep(const EncoderModel& model,
                                 const std::vector<PromptRecord>& records,
                                 const std::vector<int>& sizes,
                                 const std::vector<uint64_t>& seeds, const BpeVocab* vocab) {
    std::vector<size_t> pos_idx, neg_idx;
    for (size_t i = 0; i < records.size(); ++i)
        (records[i].nsfw ? pos_idx : neg_idx).push_back(i);
    if (pos_idx.empty() || neg_idx.empty())
        throw class_missing_error("size_sweep: both classes required");

    auto tokens_of = [&](const PromptRecord& r) { return record_tokens(r, vocab, model.config); };

    std::vector<SweepRow> out;
    for (int size : sizes) {
        if (size < 2) throw data_error("size_sweep: size must be >= 2");
        const int half = size / 2;
        if (half > static_cast<int>(pos_idx.size()) || size - half > static_cast<int>(neg_idx.size()))
            throw data_error("size_sweep: size " + std::to_string(size) +
                             " exceeds available per-class records");
        for (uint64_t seed : seeds) {
            Lcg64 rng(seed);
            auto shuffled = [&](std::vector<size_t> v, uint64_t tag) {
                Lcg64 r = rng.fork(tag);
                for (size_t i = v.size(); i > 1; --i)
                    std::swap(v[i - 1], v[r.next_below(i)]);
                return v;
            };
            const std::vector<size_t> pos = shuffled(pos_idx, 1);
            const std::vector<size_t> neg = shuffled(neg_idx, 2);
            std::vector<PromptRecord> train_set;
            std::vector<char> in_train(records.size(), 0);
            for (int i = 0; i < half; ++i) {
                train_set.push_back(records[pos[static_cast<size_t>(i)]]);
                in_train[pos[static_cast<size_t>(i)]] = 1;
            }
            for (int i = 0; i < size - half; ++i) {
                train_set.push_back(records[neg[static_cast<size_t>(i)]]);
                in_train[neg[static_cast<size_t>(i)]] = 1;
            }
            FeatureBank bank = train_bank(model, train_set, vocab);
            std::vector<std::pair<double, bool>> train_scores;
            for (const PromptRecord& r : train_set)
                train_scores.emplace_back(
                    score_from_trace(forward_trace(model, tokens_of(r), Capture::eos_only), bank),
                    r.nsfw);
            bank.threshold = calibrate_threshold(train_scores);

            std::vector<std::pair<double, bool>> held_out;
            for (size_t i = 0; i < records.size(); ++i) {
                if (in_train[i]) continue;
                held_out.emplace_back(
                    score_from_trace(forward_trace(model, tokens_of(records[i]), Capture::eos_only),
                                     bank),
                    records[i].nsfw);
            }
            // size == full dataset leaves nothing held out; report
            // training-set metrics so the row still equals direct train+eval.
            if (held_out.empty()) held_out = train_scores;
            SweepRow row;
            row.size = size;
            row.seed = seed;
            row.metrics = compute_metrics(held_out, bank.threshold);
            row.metrics.tag = "size=" + std::to_string(size) + ",seed=" + std::to_string(seed);
            out.push_back(std::move(row));
        }
    }
    return out;
}

LatencyReport bench_latency(const EncoderModel& model, const FeatureBank& bank,
                            const std::vector<TokenSequence>& prompts, int warmup, int iters) {
    if (iters < 1) throw data_error("bench_latency: iters must be >= 1");
    if (prompts.empty()) throw data_error("bench_latency: no prompts");
    using clock_type = std::chrono::steady_clock;
    for (int w = 0; w < warmup; ++w)
        for (const TokenSequence& p : prompts) forward_trace(model, p, Capture::eos_only);

    std::vector<double> encode_samples, score_samples;
    for (int it = 0; it < iters; ++it) {
        for (const TokenSequence& p : prompts) {
            auto t0 = clock_type::now();
            const TraceBundle trace = forward_trace(model, p, Capture::eos_only);
            auto t1 = clock_type::now();
            const double agg = score_from_trace(trace, bank);
            auto t2 = clock_type::now();
            (void)agg;
            encode_samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
            score_samples.push_back(std::chrono::duration<double, std::micro>(t2 - t1).count());
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    LatencyReport rep;
    rep.samples = static_cast<int>(encode_samples.size());
    rep.encode_us_median = median(encode_samples);
    rep.score_us_median = median(score_samples);
    return rep;
}

}  // namespace hg
