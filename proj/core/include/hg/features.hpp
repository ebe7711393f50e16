#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hg/dataset.hpp"
#include "hg/encoder.hpp"
#include "hg/model.hpp"
#include "hg/tokenizer.hpp"

namespace hg {

// Per-prompt training input: the (L*H, d) matrix of head summaries c^{l,h}
// at the EOS position, plus label and sample weight.
struct TrainExample {
    Matrix c;
    bool nsfw = false;
    double weight = 1.0;
};

TrainExample make_example(const TraceBundle& trace, const PromptRecord& record);

// Weighted two-class statistics per head, accumulated two-pass in f64:
// class means first, then the pooled scatter about them.
struct LdaStats {
    int n_layers = 0, n_heads = 0, dim = 0;
    std::vector<double> mean_benign;  // head-major, n_heads*n_layers blocks of dim
    std::vector<double> mean_nsfw;
    std::vector<double> scatter;  // blocks of dim*dim, symmetric PSD
    double weight_benign = 0.0, weight_nsfw = 0.0;

    int head_count() const { return n_layers * n_heads; }
    const double* mean_b(int head) const { return mean_benign.data() + static_cast<size_t>(head) * dim; }
    const double* mean_m(int head) const { return mean_nsfw.data() + static_cast<size_t>(head) * dim; }
    const double* s_w(int head) const {
        return scatter.data() + static_cast<size_t>(head) * dim * dim;
    }
};

// Raises class_missing_error unless both classes are present.
LdaStats accumulate_stats(const std::vector<TrainExample>& examples, int n_layers, int n_heads);

struct RidgePolicy {
    bool use_default = true;  // ridge = 1e-3 * trace(S_w) / d
    double value = 0.0;
};

// Fisher direction for one head: normalize(solve_spd(S_w, mu_m - mu_b)),
// sign-fixed so <u, mu_m - mu_b> > 0. Raises degenerate_error when the class
// means coincide within 1e-9.
Vector train_feature(const LdaStats& stats, int head, RidgePolicy ridge = {});

struct FeatureBank {
    int n_layers = 0, n_heads = 0, dim = 0;
    Matrix u;                          // (L*H, d), unit rows; zero rows for degenerate heads
    std::vector<uint8_t> degenerate;   // per head
    double threshold = 0.0;
    std::vector<std::string> categories;
    std::vector<Matrix> category_u;
    std::vector<std::vector<uint8_t>> category_degenerate;
    std::string fingerprint;  // EncoderConfig::fingerprint() of the training model
    std::string created_from;
    std::vector<std::string> warnings;  // e.g. categories skipped for lack of positives

    int head_count() const { return n_layers * n_heads; }
};

// Trains one direction per head (and per requested category: that category's
// positives against all benign records). Threshold starts at 0 pending
// calibration. Records with text need `vocab`; id records do not.
FeatureBank train_bank(const EncoderModel& model, const std::vector<PromptRecord>& records,
                       const BpeVocab* vocab = nullptr,
                       const std::vector<std::string>& categories = {}, RidgePolicy ridge = {});

// Full retrain over base + extra (extra records carry their own weights,
// e.g. 50 for red-team escapes).
FeatureBank augment_bank(const FeatureBank& bank, const EncoderModel& model,
                         const std::vector<PromptRecord>& base,
                         const std::vector<PromptRecord>& extra, const BpeVocab* vocab = nullptr,
                         RidgePolicy ridge = {});

void save_feature_bank(const FeatureBank& bank, const std::string& path);
FeatureBank load_feature_bank(const std::string& path);

}  // namespace hg
