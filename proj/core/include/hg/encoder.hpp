#pragma once

#include <string>
#include <vector>

#include "hg/model.hpp"
#include "hg/tokenizer.hpp"

namespace hg {

enum class Capture {
    none,           // stream only: layer states, attention, values
    eos_only,       // + per-head summaries c^{l,h} at the EOS position
    all_positions,  // + per-head summaries at every position
};

// Everything captured from one instrumented forward pass. The attention maps
// have rows = destination token, cols = source token; each row sums to 1 and
// entries above the diagonal are exactly zero (causal mask).
struct TraceBundle {
    const EncoderModel* model = nullptr;  // not owned; must outlive the bundle
    Capture capture = Capture::none;
    int seq_len = 0;  // N+1 positions including BOS and EOS
    int eos_index = 0;
    std::vector<int> token_ids;

    std::vector<Matrix> layer_inputs;                // [L] (seq, d)  Z^{l-1}
    std::vector<Matrix> layer_outputs;               // [L] (seq, d)  Z^l
    std::vector<std::vector<Matrix>> attention;      // [L][H] (seq, seq)
    std::vector<Matrix> values;                      // [L] (seq, d), head-blocked columns
    std::vector<Matrix> head_eos;                    // [L] (H, d)   c^{l,h} at EOS
    std::vector<std::vector<Matrix>> head_all;       // [L][H] (seq, d), all_positions only
    Matrix final_embedding;                          // (seq, d), post final layernorm
    Vector pooled;                                   // final_embedding row at eos_index

    // c^{l,h}: the summed per-head contribution at the EOS position.
    Vector head_summary(int l, int h) const;
    // c^{l,h}_{p_i}: the same at position i (requires all_positions capture).
    Vector token_head_summary(int l, int h, int i) const;
    // x^{l,h}_{j,i} = alpha^{l,h}_{j,i} * W^{l,h} LN1(z_j), materialized on
    // demand from the stored attention map and value rows.
    Vector head_token_contrib(int l, int h, int j, int i) const;
};

// Instrumented forward pass. Raises shape_error for out-of-range token ids or
// sequences longer than max_positions. Deterministic: identical model and
// tokens give a bitwise-identical bundle.
TraceBundle forward_trace(const EncoderModel& model, const TokenSequence& tokens, Capture capture);

// Forward pass with per-head editing: every per-head, per-token attention
// contribution c is replaced by c - beta * <c, u> u, with u the (unit or
// zero) row l*H+h of dirs; downstream layers are recomputed from the edited
// stream, layers processed in ascending order.
TraceBundle forward_trace_edited(const EncoderModel& model, const TokenSequence& tokens,
                                 const Matrix& dirs, double beta, Capture capture);

// Final-layernormed hidden state at the EOS position.
Vector pooled_embedding(const TraceBundle& trace);

// Uninstrumented forward pass (fused attention output), for latency baselines.
Vector forward_pooled_only(const EncoderModel& model, const TokenSequence& tokens);

// Trace dump in the archive container: "trace.Z.{l}", "trace.A.{l}.{h}",
// "trace.c.{l}.{h}".
void save_trace(const TraceBundle& trace, const std::string& path);

}  // namespace hg
