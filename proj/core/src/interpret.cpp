#include "hg/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hg/rng.hpp"

namespace hg {

Attribution attribute_tokens(const EncoderModel& model, const FeatureBank& bank,
                             const TokenSequence& tokens, const BpeVocab* vocab) {
    if (bank.fingerprint != model.config.fingerprint())
        throw data_error("attribute: bank fingerprint does not match the model");
    const TraceBundle trace = forward_trace(model, tokens, Capture::all_positions);
    const int L = model.config.n_layers;
    const int H = model.config.n_heads;
    const int d = model.config.d_model;
    const int n = trace.seq_len;

    Attribution at;
    at.ids = tokens.ids;
    at.special.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int id = tokens.ids[static_cast<size_t>(i)];
        at.special[static_cast<size_t>(i)] =
            (id == model.config.bos_token_id || id == model.config.eos_token_id);
    }
    if (vocab) {
        at.tokens.reserve(static_cast<size_t>(n));
        for (int id : tokens.ids) at.tokens.push_back(token_display(id, *vocab));
    }
    at.raw = Matrix(n, L * H);
    at.weighted = Matrix(n, L * H);
    at.score.assign(static_cast<size_t>(n), 0.0);

    int live_heads = 0;
    for (int hd = 0; hd < L * H; ++hd)
        if (!bank.degenerate[static_cast<size_t>(hd)]) ++live_heads;
    if (live_heads == 0) throw degenerate_error("attribute: every head is degenerate");

    // Rollout per head, layer by layer: R_l = A^{l,h} * R_{l-1}.
    std::vector<Matrix> rollout(static_cast<size_t>(H));
    for (int h = 0; h < H; ++h) rollout[static_cast<size_t>(h)] = Matrix::identity(n);

    for (int l = 0; l < L; ++l) {
        for (int h = 0; h < H; ++h) {
            rollout[static_cast<size_t>(h)] =
                matmul(trace.attention[static_cast<size_t>(l)][static_cast<size_t>(h)],
                       rollout[static_cast<size_t>(h)]);
            const int head = l * H + h;
            const float* u = bank.u.row(head);
            const bool dead = bank.degenerate[static_cast<size_t>(head)] != 0;
            const Matrix& call = trace.head_all[static_cast<size_t>(l)][static_cast<size_t>(h)];
            for (int i = 0; i < n; ++i) {
                double raw = 0.0;
                if (!dead) {
                    const double cn = norm_f64(call.row(i), d);
                    raw = (cn == 0.0) ? 0.0 : dot_f64(call.row(i), u, d) / cn;
                }
                // Accumulated source mass of position i: column sum of R_l.
                double mass = 0.0;
                for (int dest = 0; dest < n; ++dest)
                    mass += static_cast<double>(rollout[static_cast<size_t>(h)].at(dest, i));
                at.raw.at(i, head) = static_cast<float>(raw);
                at.weighted.at(i, head) = static_cast<float>(mass * raw);
                if (!dead) at.score[static_cast<size_t>(i)] += mass * raw;
            }
        }
    }
    for (double& s : at.score) s /= live_heads;

    for (int i = 0; i < n; ++i)
        if (!at.special[static_cast<size_t>(i)]) at.ranking.push_back(i);
    std::stable_sort(at.ranking.begin(), at.ranking.end(), [&](int a, int b) {
        return at.score[static_cast<size_t>(a)] > at.score[static_cast<size_t>(b)];
    });
    return at;
}

DeletionCurve deletion_curve(const EncoderModel& model, const FeatureBank& bank,
                             const BpeVocab& vocab, const TokenSequence& tokens,
                             const Attribution& attribution, int n_random_seeds, uint64_t seed) {
    const int max_pos = model.config.max_positions;

    // Content positions in removal order plus the id each position carries.
    auto run_order = [&](const std::vector<int>& order) {
        std::vector<double> curve;
        std::vector<char> removed(tokens.ids.size(), 0);
        auto rescore = [&]() {
            std::vector<int> remaining;
            for (size_t i = 0; i < tokens.ids.size(); ++i) {
                if (removed[i]) continue;
                if (attribution.special[i]) continue;
                remaining.push_back(tokens.ids[i]);
            }
            const std::string text = detokenize(remaining, vocab);
            const TokenSequence seq = tokenize(text, vocab, max_pos);
            return score_prompt(model, bank, seq).aggregate;
        };
        curve.push_back(rescore());
        for (int pos : order) {
            removed[static_cast<size_t>(pos)] = 1;
            curve.push_back(rescore());
        }
        return curve;
    };

    DeletionCurve out;
    out.attribution_scores = run_order(attribution.ranking);
    out.n_seeds = n_random_seeds;
    if (n_random_seeds > 0) {
        out.random_mean.assign(out.attribution_scores.size(), 0.0);
        for (int sidx = 0; sidx < n_random_seeds; ++sidx) {
            std::vector<int> order = attribution.ranking;
            Lcg64 rng(Lcg64::mix(seed) ^ static_cast<uint64_t>(sidx));
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.next_below(i)]);
            const std::vector<double> curve = run_order(order);
            for (size_t k = 0; k < curve.size(); ++k) out.random_mean[k] += curve[k];
        }
        for (double& v : out.random_mean) v /= n_random_seeds;
    }
    return out;
}

std::string deletion_curve_csv(const DeletionCurve& curve) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "k,score,baseline_mean\n";
    for (size_t k = 0; k < curve.attribution_scores.size(); ++k) {
        ss << k << ',' << curve.attribution_scores[k] << ',';
        if (k < curve.random_mean.size()) ss << curve.random_mean[k];
        ss << '\n';
    }
    return ss.str();
}

EditedEmbedding edit_embedding(const EncoderModel& model, const FeatureBank& bank,
                               const TokenSequence& tokens, double beta) {
    if (beta < 0.0) throw shape_error("edit_embedding: beta must be >= 0");
    if (bank.fingerprint != model.config.fingerprint())
        throw data_error("edit: bank fingerprint does not match the model");
    const TraceBundle trace = forward_trace_edited(model, tokens, bank.u, beta, Capture::eos_only);
    EditedEmbedding out;
    out.beta = beta;
    out.embedding = trace.final_embedding;
    out.pooled = trace.pooled;
    out.residual_score = score_from_trace(trace, bank);
    return out;
}

std::vector<BetaSweepRow> beta_sweep(const EncoderModel& model, const FeatureBank& bank,
                                     const TokenSequence& tokens,
                                     const std::vector<double>& betas) {
    for (size_t i = 1; i < betas.size(); ++i)
        if (betas[i] < betas[i - 1]) throw data_error("beta_sweep: betas must ascend");
    if (betas.empty()) throw data_error("beta_sweep: no betas");

    const EditedEmbedding base = edit_embedding(model, bank, tokens, 0.0);
    double base_norm = 0.0;
    for (float v : base.embedding.data) base_norm += static_cast<double>(v) * v;
    base_norm = std::sqrt(base_norm);

    std::vector<BetaSweepRow> rows;
    for (double beta : betas) {
        const EditedEmbedding e = edit_embedding(model, bank, tokens, beta);
        double diff = 0.0;
        for (size_t i = 0; i < e.embedding.data.size(); ++i) {
            const double t = static_cast<double>(e.embedding.data[i]) -
                             static_cast<double>(base.embedding.data[i]);
            diff += t * t;
        }
        rows.push_back({beta, e.residual_score, std::sqrt(diff) / base_norm});
    }
    return rows;
}

std::string beta_sweep_csv(const std::vector<BetaSweepRow>& rows) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "beta,residual_score,drift\n";
    for (const BetaSweepRow& r : rows)
        ss << r.beta << ',' << r.residual_score << ',' << r.drift << '\n';
    return ss.str();
}

}  // namespace hg
