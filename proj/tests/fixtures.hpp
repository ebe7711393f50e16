#pragma once

// Shared test fixtures: hand-built encoders with forced structure and the
// planted separable dataset used across trainer/detector/interpreter/
// robustness suites.

#include <cmath>
#include <string>
#include <vector>

#include "hg/dataset.hpp"
#include "hg/model.hpp"
#include "hg/pipeline.hpp"
#include "hg/rng.hpp"

namespace fixtures {

inline hg::EncoderConfig tiny_config(int layers = 2, int heads = 2, int d = 8, int dmlp = 16,
                                     int vocab = 64, int max_pos = 16) {
    hg::EncoderConfig c;
    c.n_layers = layers;
    c.n_heads = heads;
    c.d_model = d;
    c.d_mlp = dmlp;
    c.vocab_size = vocab;
    c.max_positions = max_pos;
    c.bos_token_id = vocab - 2;
    c.eos_token_id = vocab - 1;
    return c;
}

// L=1, H=1 model with zeroed q/k (uniform causal attention), identity value
// and output projections, zero biases and MLP, unit layernorms. The per-head
// contribution of source j at destination i is exactly LN1(z_j)/(i+1).
inline hg::EncoderModel uniform_attention_model(int d = 8, int vocab = 16, int max_pos = 16) {
    hg::EncoderConfig cfg = tiny_config(1, 1, d, 2 * d, vocab, max_pos);
    hg::EncoderModel m = hg::gen_synthetic(5, cfg);
    hg::LayerWeights& w = m.layers[0];
    w.wq = hg::Matrix(d, d);
    w.wk = hg::Matrix(d, d);
    w.wv = hg::Matrix::identity(d);
    w.wo = hg::Matrix::identity(d);
    w.bq = hg::Vector(d);
    w.bk = hg::Vector(d);
    w.bv = hg::Vector(d);
    w.bo = hg::Vector(d);
    w.fc1 = hg::Matrix(cfg.d_mlp, d);
    w.fc2 = hg::Matrix(d, cfg.d_mlp);
    w.b1 = hg::Vector(cfg.d_mlp);
    w.b2 = hg::Vector(d);
    w.ln1_g = hg::Vector(d, 1.0f);
    w.ln1_b = hg::Vector(d);
    w.ln2_g = hg::Vector(d, 1.0f);
    w.ln2_b = hg::Vector(d);
    m.lnf_g = hg::Vector(d, 1.0f);
    m.lnf_b = hg::Vector(d);
    return m;
}

struct PlantedFixture {
    hg::EncoderModel model;
    std::vector<hg::PromptRecord> train;
    std::vector<hg::PromptRecord> held_out;
    hg::PlantRanges ranges;
};

inline std::vector<int> planted_prompt(hg::Lcg64& rng, const hg::EncoderConfig& cfg,
                                       const hg::PlantRanges& r, bool nsfw, int len) {
    std::vector<int> ids;
    ids.push_back(cfg.bos_token_id);
    for (int i = 0; i < len; ++i) {
        int id;
        if (nsfw) {
            // Mostly nsfw-marked tokens with some neutral filler.
            if (rng.next_below(10) < 6)
                id = r.nsfw_lo + static_cast<int>(rng.next_below(
                                     static_cast<uint64_t>(r.nsfw_hi - r.nsfw_lo)));
            else
                id = r.benign_hi +
                     static_cast<int>(rng.next_below(static_cast<uint64_t>(r.nsfw_lo - r.benign_hi)));
        } else {
            if (rng.next_below(10) < 6)
                id = r.benign_lo + static_cast<int>(rng.next_below(
                                       static_cast<uint64_t>(r.benign_hi - r.benign_lo)));
            else
                id = r.benign_hi +
                     static_cast<int>(rng.next_below(static_cast<uint64_t>(r.nsfw_lo - r.benign_hi)));
        }
        ids.push_back(id);
    }
    ids.push_back(cfg.eos_token_id);
    return ids;
}

// Synthetic model with planted +-direction token embeddings and id-level
// datasets that are linearly separable in the head summaries by construction.
inline PlantedFixture make_planted_fixture(uint64_t seed, int n_train = 120, int n_held_out = 80,
                                           int prompt_len = 10, int categories = 1) {
    PlantedFixture fx;
    const hg::EncoderConfig cfg = tiny_config(2, 2, 32, 64, 64, 16);
    fx.model = hg::gen_synthetic(seed, cfg);
    hg::plant_direction(fx.model, 0.35, 8.0, seed ^ 0xbeefull, categories);
    fx.ranges = hg::plant_ranges(cfg, 0.35);

    hg::Lcg64 rng(hg::Lcg64::mix(seed) ^ 0x5eedull);
    auto make = [&](int n, std::vector<hg::PromptRecord>& out) {
        int nsfw_count = 0;
        for (int i = 0; i < n; ++i) {
            const bool nsfw = (i % 2) == 1;
            hg::PromptRecord rec;
            rec.nsfw = nsfw;
            if (nsfw && categories > 1) {
                // Cycle categories over the nsfw records; sample token ids
                // from that category's slice of the marked range.
                const int cat = nsfw_count % categories;
                rec.categories = {"cat" + std::to_string(cat)};
                const int span = fx.ranges.nsfw_hi - fx.ranges.nsfw_lo;
                hg::PlantRanges slice = fx.ranges;
                slice.nsfw_lo = fx.ranges.nsfw_lo + cat * span / categories;
                slice.nsfw_hi = fx.ranges.nsfw_lo + (cat + 1) * span / categories;
                rec.ids = planted_prompt(rng, cfg, slice, true, prompt_len);
                ++nsfw_count;
            } else {
                rec.ids = planted_prompt(rng, cfg, fx.ranges, nsfw, prompt_len);
                if (nsfw) ++nsfw_count;
            }
            out.push_back(std::move(rec));
        }
    };
    make(n_train, fx.train);
    make(n_held_out, fx.held_out);
    return fx;
}

inline hg::TokenSequence seq_of(const hg::PromptRecord& r) {
    return hg::sequence_from_ids(r.ids);
}

// Independent f64 recomputation of one layer's attention output from the
// model weights and the traced layer input: the oracle for the per-head
// decomposition checks.
inline hg::Matrix oracle_attention_output(const hg::EncoderModel& model, int l,
                                          const hg::Matrix& z) {
    const hg::EncoderConfig& cfg = model.config;
    const int n = z.rows, d = cfg.d_model, H = cfg.n_heads, dh = cfg.d_head();
    const hg::LayerWeights& w = model.layers[static_cast<size_t>(l)];

    std::vector<std::vector<double>> x(static_cast<size_t>(n),
                                       std::vector<double>(static_cast<size_t>(d)));
    for (int i = 0; i < n; ++i) {
        const float* row = z.row(i);
        double mean = 0, var = 0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + cfg.layernorm_eps);
        for (int j = 0; j < d; ++j)
            x[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                (row[j] - mean) * inv * w.ln1_g[j] + w.ln1_b[j];
    }
    auto proj = [&](const hg::Matrix& wm, const hg::Vector& b, const std::vector<double>& in,
                    std::vector<double>& out) {
        out.resize(static_cast<size_t>(wm.rows));
        for (int o = 0; o < wm.rows; ++o) {
            double s = b[o];
            for (int k = 0; k < wm.cols; ++k)
                s += static_cast<double>(wm.at(o, k)) * in[static_cast<size_t>(k)];
            out[static_cast<size_t>(o)] = s;
        }
    };
    std::vector<std::vector<double>> q(static_cast<size_t>(n)), k_(static_cast<size_t>(n)),
        v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        proj(w.wq, w.bq, x[static_cast<size_t>(i)], q[static_cast<size_t>(i)]);
        proj(w.wk, w.bk, x[static_cast<size_t>(i)], k_[static_cast<size_t>(i)]);
        proj(w.wv, w.bv, x[static_cast<size_t>(i)], v[static_cast<size_t>(i)]);
    }

    hg::Matrix att(n, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < H; ++h) {
        for (int i = 0; i < n; ++i) {
            std::vector<double> logits(static_cast<size_t>(i) + 1);
            double mx = -1e300;
            for (int j = 0; j <= i; ++j) {
                double s = 0;
                for (int c = 0; c < dh; ++c)
                    s += q[static_cast<size_t>(i)][static_cast<size_t>(h * dh + c)] *
                         k_[static_cast<size_t>(j)][static_cast<size_t>(h * dh + c)];
                logits[static_cast<size_t>(j)] = s * scale;
                mx = std::max(mx, logits[static_cast<size_t>(j)]);
            }
            double denom = 0;
            for (int j = 0; j <= i; ++j) denom += std::exp(logits[static_cast<size_t>(j)] - mx);
            std::vector<double> head(static_cast<size_t>(dh), 0.0);
            for (int j = 0; j <= i; ++j) {
                const double a = std::exp(logits[static_cast<size_t>(j)] - mx) / denom;
                for (int c = 0; c < dh; ++c)
                    head[static_cast<size_t>(c)] +=
                        a * v[static_cast<size_t>(j)][static_cast<size_t>(h * dh + c)];
            }
            for (int o = 0; o < d; ++o) {
                double s = 0;
                for (int c = 0; c < dh; ++c)
                    s += head[static_cast<size_t>(c)] * static_cast<double>(w.wo.at(o, h * dh + c));
                att.at(i, o) += static_cast<float>(s);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < d; ++o) att.at(i, o) += w.bo[o];
    return att;
}

}  // namespace fixtures
