#include "hg/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace hg {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_us(clock_type::time_point t0) {
    return std::chrono::duration<double, std::micro>(clock_type::now() - t0).count();
}

void check_pairing(const EncoderModel& model, const FeatureBank& bank) {
    if (bank.fingerprint != model.config.fingerprint())
        throw data_error("score: bank fingerprint does not match the model (" + bank.fingerprint +
                         " vs " + model.config.fingerprint() + ")");
}

std::vector<double> head_scores(const TraceBundle& trace, const Matrix& u) {
    const int L = trace.model->config.n_layers;
    const int H = trace.model->config.n_heads;
    const int d = trace.model->config.d_model;
    std::vector<double> out(static_cast<size_t>(L) * H);
    for (int l = 0; l < L; ++l) {
        const Matrix& ce = trace.head_eos[static_cast<size_t>(l)];
        for (int h = 0; h < H; ++h) {
            const float* urow = u.row(l * H + h);
            const double un = norm_f64(urow, d);
            out[static_cast<size_t>(l * H + h)] =
                (un == 0.0) ? 0.0 : dot_f64(ce.row(h), urow, d) / un;
        }
    }
    return out;
}

double aggregate_of(const std::vector<double>& scores) {
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

}  // namespace

double score_head(const Vector& c, const Vector& u) {
    if (c.dim() != u.dim()) throw shape_error("score_head: dimension mismatch");
    const double un = norm_f64(u);
    if (un == 0.0) return 0.0;
    if (std::abs(un - 1.0) > 1e-5)
        throw shape_error("score_head: direction is neither unit nor zero");
    return dot_f64(c, u) / un;
}

double score_from_trace(const TraceBundle& trace, const FeatureBank& bank) {
    return aggregate_of(head_scores(trace, bank.u));
}

ScoreReport score_prompt(const EncoderModel& model, const FeatureBank& bank,
                         const TokenSequence& tokens) {
    check_pairing(model, bank);
    ScoreReport rep;
    rep.threshold = bank.threshold;
    auto t0 = clock_type::now();
    const TraceBundle trace = forward_trace(model, tokens, Capture::eos_only);
    rep.encode_us = elapsed_us(t0);
    t0 = clock_type::now();
    rep.per_head = head_scores(trace, bank.u);
    rep.aggregate = aggregate_of(rep.per_head);
    const int H = model.config.n_heads;
    rep.per_layer_mean.resize(static_cast<size_t>(model.config.n_layers));
    for (int l = 0; l < model.config.n_layers; ++l) {
        double s = 0.0;
        for (int h = 0; h < H; ++h) s += rep.per_head[static_cast<size_t>(l * H + h)];
        rep.per_layer_mean[static_cast<size_t>(l)] = s / H;
    }
    rep.score_us = elapsed_us(t0);
    rep.nsfw = rep.aggregate >= rep.threshold;
    return rep;
}

double calibrate_threshold(const std::vector<std::pair<double, bool>>& scores) {
    int n_pos = 0, n_neg = 0;
    for (const auto& [s, y] : scores) (y ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw class_missing_error("calibrate_threshold: both classes required");

    std::vector<double> uniq;
    uniq.reserve(scores.size());
    for (const auto& [s, y] : scores) uniq.push_back(s);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<double> candidates;
    candidates.push_back(uniq.front());  // everything >= smallest: all NSFW
    for (size_t i = 0; i + 1 < uniq.size(); ++i)
        candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    candidates.push_back(uniq.back() + 1.0);  // nothing predicted NSFW

    double best_tau = candidates.front();
    double best_f1 = -1.0;
    for (double tau : candidates) {
        int tp = 0, fp = 0, fn = 0;
        for (const auto& [s, y] : scores) {
            const bool pred = s >= tau;
            if (pred && y) ++tp;
            else if (pred && !y) ++fp;
            else if (!pred && y) ++fn;
        }
        const double f1 = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
        if (f1 > best_f1 || (f1 == best_f1 && tau < best_tau)) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return best_tau;
}

ScoreReport score_multi_category(const EncoderModel& model, const FeatureBank& bank,
                                 const TokenSequence& tokens) {
    check_pairing(model, bank);
    if (bank.categories.empty())
        throw data_error("score_multi_category: the bank has no category features");
    ScoreReport rep;
    rep.threshold = bank.threshold;
    auto t0 = clock_type::now();
    const TraceBundle trace = forward_trace(model, tokens, Capture::eos_only);
    rep.encode_us = elapsed_us(t0);
    t0 = clock_type::now();
    double best = -HUGE_VAL;
    for (size_t c = 0; c < bank.categories.size(); ++c) {
        const double agg = aggregate_of(head_scores(trace, bank.category_u[c]));
        rep.per_category[bank.categories[c]] = agg;
        if (agg > best) {
            best = agg;
            rep.per_head = head_scores(trace, bank.category_u[c]);
        }
    }
    rep.aggregate = best;
    rep.score_us = elapsed_us(t0);
    rep.nsfw = rep.aggregate >= rep.threshold;
    return rep;
}

ScoreReport score_layer_subset(const EncoderModel& model, const FeatureBank& bank,
                               const TokenSequence& tokens, const std::vector<int>& layers) {
    check_pairing(model, bank);
    if (layers.empty()) throw shape_error("score_layer_subset: empty layer set");
    std::set<int> subset;
    for (int l : layers) {
        if (l < 1 || l > model.config.n_layers)
            throw shape_error("score_layer_subset: layer " + std::to_string(l) + " out of [1,L]");
        subset.insert(l);
    }
    ScoreReport rep;
    rep.threshold = bank.threshold;
    auto t0 = clock_type::now();
    const TraceBundle trace = forward_trace(model, tokens, Capture::eos_only);
    rep.encode_us = elapsed_us(t0);
    t0 = clock_type::now();
    rep.per_head = head_scores(trace, bank.u);
    const int H = model.config.n_heads;
    double sum = 0.0;
    for (int l : subset)
        for (int h = 0; h < H; ++h) sum += rep.per_head[static_cast<size_t>((l - 1) * H + h)];
    rep.aggregate = sum / (static_cast<double>(subset.size()) * H);
    rep.score_us = elapsed_us(t0);
    rep.nsfw = rep.aggregate >= rep.threshold;
    return rep;
}

}  // namespace hg
