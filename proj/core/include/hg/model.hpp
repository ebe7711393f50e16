#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hg/archive.hpp"
#include "hg/tensor.hpp"

namespace hg {

enum class Activation { quick_gelu, gelu };

struct EncoderConfig {
    int n_layers = 0;
    int n_heads = 0;
    int d_model = 0;
    int d_mlp = 0;
    int vocab_size = 0;
    int max_positions = 0;
    int eos_token_id = -1;
    int bos_token_id = -1;
    Activation activation = Activation::quick_gelu;
    float layernorm_eps = 1e-5f;

    int d_head() const { return d_model / n_heads; }
    void validate() const;

    std::string to_json() const;
    static EncoderConfig from_json(const std::string& text);

    // Architecture identity used to pair feature banks with models.
    std::string fingerprint() const;
};

// Projection weights are stored [out][in] row-major, so y = x W^T + b.
struct LayerWeights {
    Matrix wq, wk, wv, wo;  // each (d_model, d_model)
    Vector bq, bk, bv, bo;
    Matrix fc1;  // (d_mlp, d_model)
    Matrix fc2;  // (d_model, d_mlp)
    Vector b1, b2;
    Vector ln1_g, ln1_b, ln2_g, ln2_b;
};

struct EncoderModel {
    EncoderConfig config;
    Matrix token_embedding;     // (vocab_size, d_model)
    Matrix position_embedding;  // (max_positions, d_model)
    std::vector<LayerWeights> layers;
    Vector lnf_g, lnf_b;

    void validate() const;  // shapes against config, finiteness
};

void save_model(const EncoderModel& m, const std::string& path);
EncoderModel load_model(const std::string& path);

// Deterministic synthetic model. Every tensor is filled from a forked Lcg64
// substream in a fixed order; weights are uniform [-1,1) / sqrt(d_model),
// biases 0.1x that scale, layernorm gains 1 +- 0.1.
EncoderModel gen_synthetic(uint64_t seed, const EncoderConfig& config);

// Plants class-marker directions into the token embedding table for the
// separable fixtures: the lowest `frac` fraction of content-token rows gets
// -scale * e_base, and the highest `frac` fraction +scale * e_c, where the
// e_c are `categories` orthonormal seeded directions and e_base their mean
// direction. BOS/EOS rows are left untouched.
void plant_direction(EncoderModel& m, double frac, double scale, uint64_t seed,
                     int categories = 1);

// Content-token id ranges marked by plant_direction, exposed so fixtures and
// tests can build datasets over the same split.
struct PlantRanges {
    int benign_lo = 0, benign_hi = 0;  // [lo, hi)
    int nsfw_lo = 0, nsfw_hi = 0;      // [lo, hi), split evenly across categories
};
PlantRanges plant_ranges(const EncoderConfig& config, double frac);

}  // namespace hg
