#pragma once

#include <map>
#include <string>
#include <vector>

#include "hg/encoder.hpp"
#include "hg/features.hpp"

namespace hg {

struct ScoreReport {
    std::vector<double> per_head;  // L*H entries, layer-major
    double aggregate = 0.0;
    std::vector<double> per_layer_mean;
    std::map<std::string, double> per_category;
    double threshold = 0.0;
    bool nsfw = false;  // aggregate >= threshold (boundary counted NSFW)
    double encode_us = 0.0;
    double score_us = 0.0;
};

// <c,u>/||u||; returns 0 for zero-feature heads. ||u|| must be 0 or 1 within
// 1e-5.
double score_head(const Vector& c, const Vector& u);

// Mean of score_head over all L*H heads of the already-computed trace
// (degenerate heads contribute 0 but stay in the denominator).
double score_from_trace(const TraceBundle& trace, const FeatureBank& bank);

ScoreReport score_prompt(const EncoderModel& model, const FeatureBank& bank,
                         const TokenSequence& tokens);

// Exhaustive F1-maximizing threshold over the finite scan set: the smallest
// score (all-NSFW cut), midpoints of consecutive distinct scores, and
// max+1 (all-benign cut). Ties resolve to the smallest threshold. Scores are
// (value, is_nsfw) pairs; one-class input raises class_missing_error.
double calibrate_threshold(const std::vector<std::pair<double, bool>>& scores);

// Per-category head-mean aggregates; the final score is their maximum.
ScoreReport score_multi_category(const EncoderModel& model, const FeatureBank& bank,
                                 const TokenSequence& tokens);

// Aggregate restricted to the given 1-based layers (denominator
// |layers| * H).
ScoreReport score_layer_subset(const EncoderModel& model, const FeatureBank& bank,
                               const TokenSequence& tokens, const std::vector<int>& layers);

}  // namespace hg
