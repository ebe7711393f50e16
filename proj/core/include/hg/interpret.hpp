#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hg/detector.hpp"
#include "hg/encoder.hpp"
#include "hg/features.hpp"
#include "hg/tokenizer.hpp"

namespace hg {

struct Attribution {
    std::vector<int> ids;
    std::vector<std::string> tokens;  // display strings; empty without a vocab
    std::vector<bool> special;        // BOS/EOS positions
    Matrix raw;                       // (seq, L*H): cosine similarity to u^{l,h}
    Matrix weighted;                  // (seq, L*H): rollout-weighted
    std::vector<double> score;        // head/layer-averaged E(p)_i
    std::vector<int> ranking;         // content positions, descending score
};

// Token attribution: cosine similarity of each position's per-head summary to
// the head's direction, weighted by the accumulated rollout mass of the
// position. The rollout for head h is R_l = A^{l,h} R_{l-1} over layers 1..l
// (row-stochastic, rows = destination); the weight of position i at layer l
// is the column sum over destinations of R_l[.,i]. BOS/EOS are excluded from
// the ranking.
Attribution attribute_tokens(const EncoderModel& model, const FeatureBank& bank,
                             const TokenSequence& tokens, const BpeVocab* vocab = nullptr);

struct DeletionCurve {
    std::vector<double> attribution_scores;  // index k = score after k removals
    std::vector<double> random_mean;         // same, averaged over seeds
    int n_seeds = 0;
};

// Removes content tokens in attribution order (then in random orders for the
// baseline), re-tokenizing the remaining text after each removal and
// re-scoring. Needs a vocab because removal works in text space.
DeletionCurve deletion_curve(const EncoderModel& model, const FeatureBank& bank,
                             const BpeVocab& vocab, const TokenSequence& tokens,
                             const Attribution& attribution, int n_random_seeds, uint64_t seed);
std::string deletion_curve_csv(const DeletionCurve& curve);

struct EditedEmbedding {
    double beta = 0.0;
    Matrix embedding;       // final-layernormed conditional embedding, all positions
    Vector pooled;          // EOS row
    double residual_score;  // aggregate score of the edited stream
};

// Shrinks every per-head, per-token attention contribution along the bank's
// directions (c <- c - beta <c,u> u) and recomputes downstream layers.
EditedEmbedding edit_embedding(const EncoderModel& model, const FeatureBank& bank,
                               const TokenSequence& tokens, double beta);

struct BetaSweepRow {
    double beta;
    double residual_score;
    double drift;  // ||emb_beta - emb_0||_F / ||emb_0||_F
};

std::vector<BetaSweepRow> beta_sweep(const EncoderModel& model, const FeatureBank& bank,
                                     const TokenSequence& tokens, const std::vector<double>& betas);
std::string beta_sweep_csv(const std::vector<BetaSweepRow>& rows);

}  // namespace hg
