#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hg/detector.hpp"
#include "hg/encoder.hpp"
#include "hg/features.hpp"

namespace hg {

struct LipschitzEstimate {
    double k_hat = 0.0;          // raw max ratio * safety factor
    double raw_max_ratio = 0.0;  // max |dS| / ||dPhi|| over sampled pairs
    double safety_factor = 1.5;
    int n_valid = 0;  // sampled variants inside the locality ball
    int n_pairs = 0;  // pairs that entered the max
};

// Empirical local Lipschitz constant of the aggregate score with respect to
// the pooled embedding: seeded single-token substitutions/swaps of the base
// prompt whose pooled embeddings stay within r of the base, max pairwise
// |dS|/||dPhi|| over the collected set, scaled by 1.5. Raises sampling_error
// when no usable pair exists.
LipschitzEstimate estimate_lipschitz(const EncoderModel& model, const FeatureBank& bank,
                                     const TokenSequence& tokens, double r, int n_samples,
                                     uint64_t seed);

struct RobustnessCertificate {
    double score = 0.0;
    double threshold = 0.0;
    double locality_r = 0.0;
    double k = 0.0;
    double radius = 0.0;  // min{r, (tau - score)/K}, or 0 when score >= tau
    int k_samples = 0;
    double k_raw_max_ratio = 0.0;

    std::string to_json() const;
};

// R = min{r, (tau - S)/K} for benign prompts, 0 otherwise. K must be > 0.
RobustnessCertificate certify(const EncoderModel& model, const FeatureBank& bank,
                              const TokenSequence& tokens, double r, double k);

struct RedTeamResult {
    std::vector<int> adversarial_ids;
    double final_score = 0.0;
    bool escaped = false;
    int queries = 0;
    int edit_distance = 0;
};

// Greedy hill-climb over single-token substitutions: accepts moves that lower
// the score while the pooled embedding stays within eps_sem of the original
// target's. Stops when the score drops below the bank threshold or the query
// budget runs out.
RedTeamResult red_team_search(const EncoderModel& model, const FeatureBank& bank,
                              const TokenSequence& target, int budget, double eps_sem,
                              uint64_t seed);

// Samples token perturbations with pooled-embedding distance <= the
// certificate radius; true means a verdict flip was found (a certificate
// violation, indicating the K estimate was too small).
bool falsify_certificate(const EncoderModel& model, const FeatureBank& bank,
                         const TokenSequence& tokens, const RobustnessCertificate& cert,
                         int n_trials, uint64_t seed);

}  // namespace hg
