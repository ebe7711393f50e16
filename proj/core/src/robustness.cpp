#include "hg/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "hg/rng.hpp"

namespace hg {

namespace {

double embedding_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += t * t;
    }
    return std::sqrt(s);
}

std::vector<int> content_positions(const EncoderModel& model, const TokenSequence& tokens) {
    std::vector<int> out;
    for (int i = 0; i < tokens.length(); ++i) {
        const int id = tokens.ids[static_cast<size_t>(i)];
        if (id != model.config.bos_token_id && id != model.config.eos_token_id) out.push_back(i);
    }
    return out;
}

// One seeded token-level perturbation: substitution (or, one time in five, a
// swap of two content positions).
std::vector<int> perturb_ids(const std::vector<int>& ids, const std::vector<int>& positions,
                             const EncoderModel& model, Lcg64& rng) {
    std::vector<int> out = ids;
    if (positions.empty()) return out;
    const bool swap = positions.size() >= 2 && rng.next_below(5) == 0;
    if (swap) {
        const size_t a = rng.next_below(positions.size());
        size_t b = rng.next_below(positions.size() - 1);
        if (b >= a) ++b;
        std::swap(out[static_cast<size_t>(positions[a])], out[static_cast<size_t>(positions[b])]);
        return out;
    }
    const int pos = positions[rng.next_below(positions.size())];
    const int old_id = out[static_cast<size_t>(pos)];
    int new_id = old_id;
    for (int tries = 0; tries < 64 && (new_id == old_id || new_id == model.config.bos_token_id ||
                                       new_id == model.config.eos_token_id);
         ++tries)
        new_id = static_cast<int>(rng.next_below(static_cast<uint64_t>(model.config.vocab_size)));
    out[static_cast<size_t>(pos)] = new_id;
    return out;
}

TokenSequence with_ids(const TokenSequence& base, std::vector<int> ids) {
    TokenSequence seq;
    seq.ids = std::move(ids);
    seq.eos_index = base.eos_index;
    return seq;
}

}  // namespace

LipschitzEstimate estimate_lipschitz(const EncoderModel& model, const FeatureBank& bank,
                                     const TokenSequence& tokens, double r, int n_samples,
                                     uint64_t seed) {
    if (!(r > 0.0)) throw shape_error("estimate_lipschitz: r must be > 0");
    if (n_samples < 2) throw shape_error("estimate_lipschitz: n_samples must be >= 2");
    const TraceBundle base = forward_trace(model, tokens, Capture::eos_only);
    const Vector base_phi = base.pooled;

    std::vector<std::pair<double, Vector>> inside;  // (score, pooled)
    inside.emplace_back(score_from_trace(base, bank), base_phi);

    Lcg64 rng(seed);
    const std::vector<int> positions = content_positions(model, tokens);
    for (int s = 0; s < n_samples; ++s) {
        const std::vector<int> ids = perturb_ids(tokens.ids, positions, model, rng);
        if (ids == tokens.ids) continue;
        const TraceBundle t = forward_trace(model, with_ids(tokens, ids), Capture::eos_only);
        if (embedding_distance(t.pooled, base_phi) <= r)
            inside.emplace_back(score_from_trace(t, bank), t.pooled);
    }

    LipschitzEstimate est;
    est.n_valid = static_cast<int>(inside.size()) - 1;
    for (size_t a = 0; a < inside.size(); ++a) {
        for (size_t b = a + 1; b < inside.size(); ++b) {
            const double dist = embedding_distance(inside[a].second, inside[b].second);
            if (dist < 1e-9) continue;
            est.raw_max_ratio = std::max(est.raw_max_ratio,
                                         std::abs(inside[a].first - inside[b].first) / dist);
            ++est.n_pairs;
        }
    }
    if (est.n_pairs == 0)
        throw sampling_error("estimate_lipschitz: no usable prompt pairs within the locality ball");
    est.k_hat = est.safety_factor * est.raw_max_ratio;
    return est;
}

std::string RobustnessCertificate::to_json() const {
    nlohmann::json j = {{"score", score},
                        {"threshold", threshold},
                        {"locality_r", locality_r},
                        {"k", k},
                        {"radius", radius},
                        {"k_samples", k_samples},
                        {"k_raw_max_ratio", k_raw_max_ratio}};
    return j.dump();
}

RobustnessCertificate certify(const EncoderModel& model, const FeatureBank& bank,
                              const TokenSequence& tokens, double r, double k) {
    if (!(k > 0.0)) throw shape_error("certify: K must be > 0");
    if (!(r > 0.0)) throw shape_error("certify: r must be > 0");
    RobustnessCertificate cert;
    cert.threshold = bank.threshold;
    cert.locality_r = r;
    cert.k = k;
    const TraceBundle trace = forward_trace(model, tokens, Capture::eos_only);
    cert.score = score_from_trace(trace, bank);
    cert.radius = (cert.score < cert.threshold)
                      ? std::min(r, (cert.threshold - cert.score) / k)
                      : 0.0;
    return cert;
}

RedTeamResult red_team_search(const EncoderModel& model, const FeatureBank& bank,
                              const TokenSequence& target, int budget, double eps_sem,
                              uint64_t seed) {
    const TraceBundle base = forward_trace(model, target, Capture::eos_only);
    const Vector base_phi = base.pooled;
    const double tau = bank.threshold;

    RedTeamResult res;
    res.adversarial_ids = target.ids;
    res.final_score = score_from_trace(base, bank);
    res.queries = 0;
    if (res.final_score < tau) {  // already below threshold: trivially escaped
        res.escaped = true;
        return res;
    }

    Lcg64 rng(seed);
    const std::vector<int> positions = content_positions(model, target);
    std::vector<int> current = target.ids;
    double current_score = res.final_score;

    while (res.queries < budget && current_score >= tau) {
        // One greedy step: evaluate a seeded candidate batch, take the best
        // admissible improvement.
        const int batch = std::min(32, budget - res.queries);
        double best_score = current_score;
        std::vector<int> best_ids;
        for (int c = 0; c < batch; ++c) {
            std::vector<int> ids = perturb_ids(current, positions, model, rng);
            if (ids == current) continue;
            const TraceBundle t = forward_trace(model, with_ids(target, ids), Capture::eos_only);
            ++res.queries;
            if (embedding_distance(t.pooled, base_phi) > eps_sem) continue;
            const double s = score_from_trace(t, bank);
            if (s < best_score) {
                best_score = s;
                best_ids = std::move(ids);
            }
        }
        if (best_ids.empty()) continue;  // no admissible improvement this step
        current = std::move(best_ids);
        current_score = best_score;
    }

    res.adversarial_ids = current;
    res.final_score = current_score;
    res.escaped = current_score < tau;
    for (size_t i = 0; i < current.size(); ++i)
        if (current[i] != target.ids[i]) ++res.edit_distance;
    return res;
}

bool falsify_certificate(const EncoderModel& model, const FeatureBank& bank,
                         const TokenSequence& tokens, const RobustnessCertificate& cert,
                         int n_trials, uint64_t seed) {
    if (cert.radius <= 0.0) return false;  // nothing to falsify
    const TraceBundle base = forward_trace(model, tokens, Capture::eos_only);
    const Vector base_phi = base.pooled;

    Lcg64 rng(Lcg64::mix(seed) ^ 0xfa1517ull);
    const std::vector<int> positions = content_positions(model, tokens);
    int valid = 0;
    int attempts = 0;
    const int max_attempts = n_trials * 50;
    while (valid < n_trials && attempts < max_attempts) {
        ++attempts;
        const std::vector<int> ids = perturb_ids(tokens.ids, positions, model, rng);
        if (ids == tokens.ids) continue;
        const TraceBundle t = forward_trace(model, with_ids(tokens, ids), Capture::eos_only);
        if (embedding_distance(t.pooled, base_phi) > cert.radius) continue;
        ++valid;
        if (score_from_trace(t, bank) >= cert.threshold) return true;  // violation
    }
    return false;
}

}  // namespace hg
