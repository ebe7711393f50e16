#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "fixtures.hpp"
#include "hg/archive.hpp"
#include "hg/encoder.hpp"
#include "hg/rng.hpp"

using namespace hg;

namespace {

TokenSequence ids_seq(std::vector<int> ids) { return sequence_from_ids(std::move(ids)); }

}  // namespace

TEST_CASE("uniform-attention model decomposes exactly by construction") {
    const EncoderModel m = fixtures::uniform_attention_model();
    const int d = m.config.d_model;
    const TokenSequence seq = ids_seq({14, 3, 5, 9, 15});
    const TraceBundle t = forward_trace(m, seq, Capture::all_positions);

    // Attention is uniform over the causal prefix.
    const Matrix& a = t.attention[0][0];
    for (int i = 0; i < t.seq_len; ++i)
        for (int j = 0; j <= i; ++j)
            CHECK(a.at(i, j) == doctest::Approx(1.0 / (i + 1)).epsilon(1e-6));

    // x_{j,i} = LN1(z_j) / (i+1), and the per-head sum reconstructs the
    // attention output with zero bias.
    const Matrix& z = t.layer_inputs[0];
    for (int i = 0; i < t.seq_len; ++i) {
        std::vector<double> sum(static_cast<size_t>(d), 0.0);
        for (int j = 0; j <= i; ++j) {
            const Vector x = t.head_token_contrib(0, 0, j, i);
            const Vector ln = layernorm(z.row_vector(j), m.layers[0].ln1_g, m.layers[0].ln1_b,
                                        m.config.layernorm_eps);
            for (int c = 0; c < d; ++c) {
                CHECK(x[c] == doctest::Approx(ln[c] / (i + 1)).epsilon(1e-5));
                sum[static_cast<size_t>(c)] += x[c];
            }
        }
        // zhat - z = ATT; bias is zero here.
        const Vector att_row = [&] {
            Vector out(d);
            for (int c = 0; c < d; ++c)
                out[c] = t.layer_outputs[0].at(i, c) - z.at(i, c);
            return out;
        }();
        // MLP is zeroed, so layer_output = zhat = z + ATT.
        for (int c = 0; c < d; ++c)
            CHECK(sum[static_cast<size_t>(c)] == doctest::Approx(att_row[c]).epsilon(1e-4));
    }
}

TEST_CASE("decomposition identity against the f64 oracle") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config(2, 2, 8, 16, 64, 16));
    const TokenSequence seq = ids_seq({10, 20, 30, 40, 63});
    const TraceBundle t = forward_trace(m, seq, Capture::all_positions);

    for (int l = 0; l < m.config.n_layers; ++l) {
        const Matrix att =
            fixtures::oracle_attention_output(m, l, t.layer_inputs[static_cast<size_t>(l)]);
        for (int i = 0; i < t.seq_len; ++i) {
            std::vector<double> sum(static_cast<size_t>(m.config.d_model), 0.0);
            for (int h = 0; h < m.config.n_heads; ++h)
                for (int j = 0; j <= i; ++j) {
                    const Vector x = t.head_token_contrib(l, h, j, i);
                    for (int c = 0; c < m.config.d_model; ++c) sum[static_cast<size_t>(c)] += x[c];
                }
            double num = 0, den = 0;
            for (int c = 0; c < m.config.d_model; ++c) {
                const double target = static_cast<double>(att.at(i, c));
                const double got = sum[static_cast<size_t>(c)] + m.layers[static_cast<size_t>(l)].bo[c];
                num += (got - target) * (got - target);
                den += target * target;
            }
            CHECK(std::sqrt(num) < 1e-4 * std::sqrt(den));
        }
    }
}

TEST_CASE("head summaries equal the summed token contributions") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const TokenSequence seq = ids_seq({1, 2, 3, 63});
    const TraceBundle t = forward_trace(m, seq, Capture::all_positions);
    for (int l = 0; l < m.config.n_layers; ++l)
        for (int h = 0; h < m.config.n_heads; ++h) {
            const Vector c = t.head_summary(l, h);
            std::vector<double> sum(static_cast<size_t>(m.config.d_model), 0.0);
            for (int j = 0; j < t.seq_len; ++j) {
                const Vector x = t.head_token_contrib(l, h, j, t.eos_index);
                for (int k = 0; k < m.config.d_model; ++k) sum[static_cast<size_t>(k)] += x[k];
            }
            for (int k = 0; k < m.config.d_model; ++k)
                CHECK(c[k] == doctest::Approx(sum[static_cast<size_t>(k)]).epsilon(1e-4));
        }
}

TEST_CASE("attention maps are row-stochastic and strictly causal") {
    const EncoderModel m = gen_synthetic(9, fixtures::tiny_config());
    const TokenSequence seq = ids_seq({5, 6, 7, 8, 9, 63});
    const TraceBundle t = forward_trace(m, seq, Capture::eos_only);
    for (const auto& layer : t.attention)
        for (const Matrix& a : layer)
            for (int i = 0; i < a.rows; ++i) {
                double sum = 0;
                for (int j = 0; j < a.cols; ++j) {
                    if (j > i) CHECK(a.at(i, j) == 0.0f);
                    sum += a.at(i, j);
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            }
}

TEST_CASE("causal prefix invariance") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const TokenSequence a = ids_seq({1, 2, 3, 30, 40, 63});
    const TokenSequence b = ids_seq({1, 2, 3, 31, 41, 63});
    const TraceBundle ta = forward_trace(m, a, Capture::eos_only);
    const TraceBundle tb = forward_trace(m, b, Capture::eos_only);
    // Positions 0..2 share every layer state bitwise.
    for (int l = 0; l < m.config.n_layers; ++l)
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < m.config.d_model; ++c) {
                CHECK(ta.layer_inputs[static_cast<size_t>(l)].at(i, c) ==
                      tb.layer_inputs[static_cast<size_t>(l)].at(i, c));
                CHECK(ta.layer_outputs[static_cast<size_t>(l)].at(i, c) ==
                      tb.layer_outputs[static_cast<size_t>(l)].at(i, c));
            }
}

TEST_CASE("forward_trace is bitwise deterministic") {
    const EncoderModel m = gen_synthetic(21, fixtures::tiny_config());
    const TokenSequence seq = ids_seq({11, 12, 13, 63});
    const TraceBundle a = forward_trace(m, seq, Capture::eos_only);
    const TraceBundle b = forward_trace(m, seq, Capture::eos_only);
    CHECK(a.final_embedding.data == b.final_embedding.data);
    CHECK(a.pooled.data == b.pooled.data);
    for (int l = 0; l < m.config.n_layers; ++l)
        CHECK(a.head_eos[static_cast<size_t>(l)].data == b.head_eos[static_cast<size_t>(l)].data);
}

TEST_CASE("eos_only and all_positions captures agree exactly") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const TokenSequence seq = ids_seq({4, 8, 15, 16, 23, 42, 63});
    const TraceBundle eos = forward_trace(m, seq, Capture::eos_only);
    const TraceBundle all = forward_trace(m, seq, Capture::all_positions);
    for (int l = 0; l < m.config.n_layers; ++l) {
        CHECK(eos.head_eos[static_cast<size_t>(l)].data == all.head_eos[static_cast<size_t>(l)].data);
        for (int h = 0; h < m.config.n_heads; ++h) {
            const Vector c_all = all.token_head_summary(l, h, all.eos_index);
            const Vector c_eos = eos.head_summary(l, h);
            CHECK(c_all.data == c_eos.data);
        }
    }
    CHECK(eos.final_embedding.data == all.final_embedding.data);
}

TEST_CASE("pooling follows the first EOS occurrence") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    // Duplicate EOS: the record path pools at the first one.
    const TokenSequence dup = sequence_from_ids({62, 1, 63, 2, 63}, m.config.eos_token_id);
    CHECK(dup.eos_index == 2);
    const TokenSequence prefix = sequence_from_ids({62, 1, 63}, m.config.eos_token_id);
    const Vector a = forward_trace(m, dup, Capture::none).pooled;
    const Vector b = forward_trace(m, prefix, Capture::none).pooled;
    // Causality: the pooled state at position 2 ignores everything after it.
    CHECK(a.data == b.data);
}

TEST_CASE("pooled embedding reflects content changes") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const Vector p1 = forward_trace(m, ids_seq({1, 2, 3, 63}), Capture::none).pooled;
    const Vector p2 = forward_trace(m, ids_seq({1, 2, 3, 63}), Capture::none).pooled;
    const Vector p3 = forward_trace(m, ids_seq({1, 2, 4, 63}), Capture::none).pooled;
    CHECK(p1.data == p2.data);
    double diff = 0;
    for (int i = 0; i < p1.dim(); ++i) diff += std::abs(p1[i] - p3[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("pooled-only forward agrees with the instrumented pass") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const TokenSequence seq = ids_seq({2, 4, 6, 63});
    const Vector a = forward_trace(m, seq, Capture::none).pooled;
    const Vector b = forward_pooled_only(m, seq);
    for (int i = 0; i < a.dim(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-4));
}

TEST_CASE("forward rejects bad inputs") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    CHECK_THROWS_AS(forward_trace(m, ids_seq({1, 999, 63}), Capture::none), shape_error);
    std::vector<int> too_long(static_cast<size_t>(m.config.max_positions) + 1, 1);
    too_long.back() = 63;
    CHECK_THROWS_AS(forward_trace(m, ids_seq(too_long), Capture::none), shape_error);
}

TEST_CASE("trace dump writes the documented names") {
    const EncoderModel m = gen_synthetic(7, fixtures::tiny_config());
    const TraceBundle t = forward_trace(m, ids_seq({1, 2, 63}), Capture::eos_only);
    const std::string path = "/tmp/hg_test_trace_dump";
    save_trace(t, path);
    const TensorArchive a = TensorArchive::load(path);
    CHECK(a.contains("trace.Z.0"));
    CHECK(a.contains("trace.A.1.1"));
    CHECK(a.contains("trace.c.0.0"));
    CHECK(a.get_matrix("trace.A.0.0").rows == t.seq_len);
    std::remove(path.c_str());
}
