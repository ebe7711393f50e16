#include "hg/encoder.hpp"

#include <cmath>
#include <cstring>

#include "hg/archive.hpp"
#include "kernels.hpp"

namespace hg {

namespace {

// y = x * W^T + b for W stored [out][in].
Matrix project(const Matrix& x, const Matrix& w, const Vector& b) {
    Matrix y(x.rows, w.rows);
    detail::gemm_nt_f32(x.data.data(), w.data.data(), y.data.data(), x.rows, x.cols, w.rows);
    for (int i = 0; i < y.rows; ++i) {
        float* row = y.row(i);
        for (int j = 0; j < y.cols; ++j) row[j] += b[j];
    }
    return y;
}

Matrix layernorm_rows(const Matrix& x, const Vector& g, const Vector& b, float eps) {
    Matrix out(x.rows, x.cols);
    const int d = x.cols;
    for (int i = 0; i < x.rows; ++i) {
        const float* src = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += static_cast<double>(src[j]);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double t = static_cast<double>(src[j]) - mean;
            var += t * t;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        float* dst = out.row(i);
        for (int j = 0; j < d; ++j)
            dst[j] = static_cast<float>((static_cast<double>(src[j]) - mean) * inv * g[j] + b[j]);
    }
    return out;
}

TraceBundle forward_impl(const EncoderModel& model, const TokenSequence& tokens, Capture capture,
                         const Matrix* dirs, double beta) {
    const EncoderConfig& cfg = model.config;
    const int n = tokens.length();
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = cfg.d_head();
    if (n < 1) throw shape_error("forward: empty token sequence");
    if (n > cfg.max_positions) throw shape_error("forward: sequence longer than max_positions");
    for (int id : tokens.ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw shape_error("forward: token id " + std::to_string(id) + " out of range");
    if (dirs && (dirs->rows != cfg.n_layers * H || dirs->cols != d))
        throw shape_error("forward: edit direction matrix must be (L*H, d)");

    TraceBundle t;
    t.model = &model;
    t.capture = capture;
    t.seq_len = n;
    t.eos_index = tokens.eos_index;
    t.token_ids = tokens.ids;

    Matrix z(n, d);
    for (int i = 0; i < n; ++i) {
        const float* te = model.token_embedding.row(tokens.ids[static_cast<size_t>(i)]);
        const float* pe = model.position_embedding.row(i);
        float* dst = z.row(i);
        for (int j = 0; j < d; ++j) dst[j] = te[j] + pe[j];
    }

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix p(H * n, d);  // per-head projected contributions, head-major blocks
    Matrix s(n, d);      // attention-weighted values, head-blocked columns

    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& w = model.layers[static_cast<size_t>(l)];
        t.layer_inputs.push_back(z);

        const Matrix x = layernorm_rows(z, w.ln1_g, w.ln1_b, cfg.layernorm_eps);
        const Matrix q = project(x, w.wq, w.bq);
        const Matrix k = project(x, w.wk, w.bk);
        const Matrix v = project(x, w.wv, w.bv);
        t.values.push_back(v);

        t.attention.emplace_back();
        auto& attn_l = t.attention.back();
        attn_l.reserve(static_cast<size_t>(H));
        for (int h = 0; h < H; ++h) {
            Matrix logits(n, n, kMaskLogit);
            for (int i = 0; i < n; ++i) {
                const float* qrow = q.row(i) + h * dh;
                for (int j = 0; j <= i; ++j)
                    logits.at(i, j) =
                        static_cast<float>(dot_f64(qrow, k.row(j) + h * dh, dh) * inv_sqrt_dh);
            }
            Matrix a = softmax_rows(logits);
            // Causal: zero out the masked region exactly.
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) a.at(i, j) = 0.0f;
            // S_h = A_h V_h with f64 row accumulation.
            std::vector<double> acc(static_cast<size_t>(dh));
            for (int i = 0; i < n; ++i) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int j = 0; j <= i; ++j) {
                    const double aij = static_cast<double>(a.at(i, j));
                    const float* vrow = v.row(j) + h * dh;
                    for (int c = 0; c < dh; ++c) acc[static_cast<size_t>(c)] += aij * vrow[c];
                }
                float* srow = s.row(i) + h * dh;
                for (int c = 0; c < dh; ++c) srow[c] = static_cast<float>(acc[static_cast<size_t>(c)]);
            }
            attn_l.push_back(std::move(a));
        }

        // Per-head output projection: p block h holds c^{l,h}_{p_i} rows.
        detail::headwise_project_f32(s.data.data(), w.wo.data.data(), p.data.data(), n, d, H,
                                     static_cast<size_t>(n) * d);

        if (dirs && beta != 0.0) {
            for (int h = 0; h < H; ++h) {
                const float* u = dirs->row(l * H + h);
                const double un = dot_f64(u, u, d);
                if (un < 0.25) continue;  // zero-feature head, nothing to edit
                for (int i = 0; i < n; ++i) {
                    float* crow = p.row(h * n + i);
                    const double proj = dot_f64(crow, u, d);
                    const float scale = static_cast<float>(beta * proj);
                    for (int j = 0; j < d; ++j) crow[j] -= scale * u[j];
                }
            }
        }

        if (capture != Capture::none) {
            Matrix ce(H, d);
            for (int h = 0; h < H; ++h)
                std::memcpy(ce.row(h), p.row(h * n + t.eos_index), sizeof(float) * static_cast<size_t>(d));
            t.head_eos.push_back(std::move(ce));
            if (capture == Capture::all_positions) {
                t.head_all.emplace_back();
                for (int h = 0; h < H; ++h) {
                    Matrix ch(n, d);
                    std::memcpy(ch.data.data(), p.row(h * n),
                                sizeof(float) * static_cast<size_t>(n) * d);
                    t.head_all.back().push_back(std::move(ch));
                }
            }
        }

        // ATT output = sum of per-head contributions + output bias (once).
        Matrix zhat(n, d);
        for (int i = 0; i < n; ++i) {
            float* dst = zhat.row(i);
            const float* zi = z.row(i);
            for (int j = 0; j < d; ++j) {
                double acc = static_cast<double>(w.bo[j]);
                for (int h = 0; h < H; ++h) acc += static_cast<double>(p.at(h * n + i, j));
                dst[j] = zi[j] + static_cast<float>(acc);
            }
        }

        const Matrix x2 = layernorm_rows(zhat, w.ln2_g, w.ln2_b, cfg.layernorm_eps);
        Matrix m1 = project(x2, w.fc1, w.b1);
        if (cfg.activation == Activation::quick_gelu) {
            for (float& vv : m1.data) vv = gelu_quick(vv);
        } else {
            for (float& vv : m1.data) vv = gelu_exact(vv);
        }
        const Matrix m2 = project(m1, w.fc2, w.b2);
        for (int i = 0; i < n; ++i) {
            float* dst = z.row(i);
            const float* a = zhat.row(i);
            const float* b = m2.row(i);
            for (int j = 0; j < d; ++j) dst[j] = a[j] + b[j];
        }
        t.layer_outputs.push_back(z);
    }

    t.final_embedding = layernorm_rows(z, model.lnf_g, model.lnf_b, cfg.layernorm_eps);
    t.pooled = t.final_embedding.row_vector(t.eos_index);
    return t;
}

}  // namespace

TraceBundle forward_trace(const EncoderModel& model, const TokenSequence& tokens, Capture capture) {
    return forward_impl(model, tokens, capture, nullptr, 0.0);
}

TraceBundle forward_trace_edited(const EncoderModel& model, const TokenSequence& tokens,
                                 const Matrix& dirs, double beta, Capture capture) {
    if (beta < 0.0) throw shape_error("forward_trace_edited: beta must be >= 0");
    return forward_impl(model, tokens, capture, &dirs, beta);
}

Vector TraceBundle::head_summary(int l, int h) const {
    if (capture == Capture::none) throw shape_error("trace: no head summaries captured");
    return head_eos[static_cast<size_t>(l)].row_vector(h);
}

Vector TraceBundle::token_head_summary(int l, int h, int i) const {
    if (capture != Capture::all_positions)
        throw shape_error("trace: per-token head summaries need all_positions capture");
    return head_all[static_cast<size_t>(l)][static_cast<size_t>(h)].row_vector(i);
}

Vector TraceBundle::head_token_contrib(int l, int h, int j, int i) const {
    const EncoderConfig& cfg = model->config;
    const int d = cfg.d_model;
    const int dh = cfg.d_head();
    if (l < 0 || l >= cfg.n_layers || h < 0 || h >= cfg.n_heads || j >= seq_len || i >= seq_len)
        throw shape_error("trace: head_token_contrib index out of range");
    const double alpha =
        static_cast<double>(attention[static_cast<size_t>(l)][static_cast<size_t>(h)].at(i, j));
    const float* vrow = values[static_cast<size_t>(l)].row(j) + h * dh;
    const Matrix& wo = model->layers[static_cast<size_t>(l)].wo;
    Vector out(d);
    for (int c = 0; c < d; ++c) {
        // W^{l,h} column c: out_proj rows are [out][in]; head h's inputs.
        out[c] = static_cast<float>(alpha * dot_f64(vrow, wo.row(c) + h * dh, dh));
    }
    return out;
}

Vector pooled_embedding(const TraceBundle& trace) { return trace.pooled; }

Vector forward_pooled_only(const EncoderModel& model, const TokenSequence& tokens) {
    const EncoderConfig& cfg = model.config;
    const int n = tokens.length();
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = cfg.d_head();
    if (n > cfg.max_positions) throw shape_error("forward: sequence longer than max_positions");
    for (int id : tokens.ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw shape_error("forward: token id " + std::to_string(id) + " out of range");

    Matrix z(n, d);
    for (int i = 0; i < n; ++i) {
        const float* te = model.token_embedding.row(tokens.ids[static_cast<size_t>(i)]);
        const float* pe = model.position_embedding.row(i);
        float* dst = z.row(i);
        for (int j = 0; j < d; ++j) dst[j] = te[j] + pe[j];
    }
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix s(n, d);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& w = model.layers[static_cast<size_t>(l)];
        const Matrix x = layernorm_rows(z, w.ln1_g, w.ln1_b, cfg.layernorm_eps);
        const Matrix q = project(x, w.wq, w.bq);
        const Matrix k = project(x, w.wk, w.bk);
        const Matrix v = project(x, w.wv, w.bv);
        for (int h = 0; h < H; ++h) {
            Matrix logits(n, n, kMaskLogit);
            for (int i = 0; i < n; ++i) {
                const float* qrow = q.row(i) + h * dh;
                for (int j = 0; j <= i; ++j)
                    logits.at(i, j) =
                        static_cast<float>(dot_f64(qrow, k.row(j) + h * dh, dh) * inv_sqrt_dh);
            }
            const Matrix a = softmax_rows(logits);
            std::vector<double> acc(static_cast<size_t>(dh));
            for (int i = 0; i < n; ++i) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int j = 0; j <= i; ++j) {
                    const double aij = static_cast<double>(a.at(i, j));
                    const float* vrow = v.row(j) + h * dh;
                    for (int c = 0; c < dh; ++c) acc[static_cast<size_t>(c)] += aij * vrow[c];
                }
                float* srow = s.row(i) + h * dh;
                for (int c = 0; c < dh; ++c) srow[c] = static_cast<float>(acc[static_cast<size_t>(c)]);
            }
        }
        // Fused output projection.
        const Matrix att = project(s, w.wo, w.bo);
        Matrix zhat(n, d);
        for (size_t idx = 0; idx < z.data.size(); ++idx) zhat.data[idx] = z.data[idx] + att.data[idx];
        const Matrix x2 = layernorm_rows(zhat, w.ln2_g, w.ln2_b, cfg.layernorm_eps);
        Matrix m1 = project(x2, w.fc1, w.b1);
        if (cfg.activation == Activation::quick_gelu) {
            for (float& vv : m1.data) vv = gelu_quick(vv);
        } else {
            for (float& vv : m1.data) vv = gelu_exact(vv);
        }
        const Matrix m2 = project(m1, w.fc2, w.b2);
        for (size_t idx = 0; idx < z.data.size(); ++idx) z.data[idx] = zhat.data[idx] + m2.data[idx];
    }
    const Matrix fin = layernorm_rows(z, model.lnf_g, model.lnf_b, cfg.layernorm_eps);
    return fin.row_vector(tokens.eos_index);
}

void save_trace(const TraceBundle& trace, const std::string& path) {
    TensorArchive a;
    const int L = static_cast<int>(trace.layer_outputs.size());
    const int H = trace.model->config.n_heads;
    for (int l = 0; l < L; ++l) {
        a.add_matrix("trace.Z." + std::to_string(l), trace.layer_outputs[static_cast<size_t>(l)]);
        for (int h = 0; h < H; ++h)
            a.add_matrix("trace.A." + std::to_string(l) + "." + std::to_string(h),
                         trace.attention[static_cast<size_t>(l)][static_cast<size_t>(h)]);
        if (trace.capture != Capture::none)
            for (int h = 0; h < H; ++h)
                a.add_vector("trace.c." + std::to_string(l) + "." + std::to_string(h),
                             trace.head_summary(l, h));
    }
    a.save(path);
}

}  // namespace hg
