#include <benchmark/benchmark.h>

#include <cmath>

#include "hg/detector.hpp"
#include "hg/encoder.hpp"
#include "hg/features.hpp"
#include "hg/model.hpp"
#include "hg/pipeline.hpp"
#include "hg/rng.hpp"
#include "hg/tensor.hpp"

namespace {

hg::EncoderConfig config(int layers, int heads, int d, int dmlp, int vocab) {
    hg::EncoderConfig c;
    c.n_layers = layers;
    c.n_heads = heads;
    c.d_model = d;
    c.d_mlp = dmlp;
    c.vocab_size = vocab;
    c.max_positions = 77;
    c.bos_token_id = vocab - 2;
    c.eos_token_id = vocab - 1;
    return c;
}

hg::TokenSequence prompt_of(const hg::EncoderConfig& cfg, int content_len) {
    std::vector<int> ids = {cfg.bos_token_id};
    hg::Lcg64 rng(42);
    for (int i = 0; i < content_len; ++i)
        ids.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(cfg.vocab_size - 2))));
    ids.push_back(cfg.eos_token_id);
    return hg::sequence_from_ids(ids);
}

hg::FeatureBank random_bank(const hg::EncoderConfig& cfg) {
    hg::FeatureBank bank;
    bank.n_layers = cfg.n_layers;
    bank.n_heads = cfg.n_heads;
    bank.dim = cfg.d_model;
    bank.u = hg::Matrix(cfg.n_layers * cfg.n_heads, cfg.d_model);
    hg::Lcg64 rng(7);
    for (int hd = 0; hd < bank.u.rows; ++hd) {
        double n2 = 0;
        for (int j = 0; j < cfg.d_model; ++j) {
            bank.u.at(hd, j) = rng.next_symmetric();
            n2 += static_cast<double>(bank.u.at(hd, j)) * bank.u.at(hd, j);
        }
        for (int j = 0; j < cfg.d_model; ++j)
            bank.u.at(hd, j) /= static_cast<float>(std::sqrt(n2));
    }
    bank.degenerate.assign(static_cast<size_t>(bank.u.rows), 0);
    bank.fingerprint = cfg.fingerprint();
    return bank;
}

void BM_forward_trace_small(benchmark::State& state) {
    const hg::EncoderConfig cfg = config(2, 2, 32, 64, 64);
    const hg::EncoderModel m = hg::gen_synthetic(1, cfg);
    const hg::TokenSequence seq = prompt_of(cfg, 10);
    for (auto _ : state)
        benchmark::DoNotOptimize(hg::forward_trace(m, seq, hg::Capture::eos_only));
}
BENCHMARK(BM_forward_trace_small);

void BM_forward_trace_clip_l_shape(benchmark::State& state) {
    const hg::EncoderConfig cfg = config(12, 12, 768, 3072, 1024);
    const hg::EncoderModel m = hg::gen_synthetic(1, cfg);
    const hg::TokenSequence seq = prompt_of(cfg, static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(hg::forward_trace(m, seq, hg::Capture::eos_only));
}
BENCHMARK(BM_forward_trace_clip_l_shape)->Arg(6)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_bare_forward_clip_l_shape(benchmark::State& state) {
    const hg::EncoderConfig cfg = config(12, 12, 768, 3072, 1024);
    const hg::EncoderModel m = hg::gen_synthetic(1, cfg);
    const hg::TokenSequence seq = prompt_of(cfg, 6);
    for (auto _ : state) benchmark::DoNotOptimize(hg::forward_pooled_only(m, seq));
}
BENCHMARK(BM_bare_forward_clip_l_shape)->Unit(benchmark::kMillisecond);

void BM_score_after_trace(benchmark::State& state) {
    const hg::EncoderConfig cfg = config(12, 12, 768, 3072, 1024);
    const hg::EncoderModel m = hg::gen_synthetic(1, cfg);
    const hg::FeatureBank bank = random_bank(cfg);
    const hg::TraceBundle trace = hg::forward_trace(m, prompt_of(cfg, 6), hg::Capture::eos_only);
    for (auto _ : state) benchmark::DoNotOptimize(hg::score_from_trace(trace, bank));
}
BENCHMARK(BM_score_after_trace);

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    hg::Lcg64 rng(3);
    hg::Matrix a(n, n), b(n, n);
    for (float& v : a.data) v = rng.next_symmetric();
    for (float& v : b.data) v = rng.next_symmetric();
    for (auto _ : state) benchmark::DoNotOptimize(hg::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * 2 * static_cast<int64_t>(n) * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
