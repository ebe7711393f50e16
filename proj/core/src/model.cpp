#include "hg/model.hpp"

#include <cmath>

#include <json.hpp>

#include "hg/rng.hpp"

namespace hg {

using nlohmann::json;

void EncoderConfig::validate() const {
    if (n_layers < 1) throw shape_error("config: n_layers must be >= 1");
    if (n_heads < 1) throw shape_error("config: n_heads must be >= 1");
    if (d_model < 1 || d_model % n_heads != 0)
        throw shape_error("config: d_model must be a positive multiple of n_heads");
    if (d_mlp < 1) throw shape_error("config: d_mlp must be >= 1");
    if (vocab_size < 2) throw shape_error("config: vocab_size must be >= 2");
    if (max_positions < 2) throw shape_error("config: max_positions must be >= 2");
    if (eos_token_id < 0 || eos_token_id >= vocab_size)
        throw shape_error("config: eos_token_id out of range");
    if (bos_token_id < 0 || bos_token_id >= vocab_size)
        throw shape_error("config: bos_token_id out of range");
    if (eos_token_id == bos_token_id) throw shape_error("config: eos and bos ids must differ");
}

std::string EncoderConfig::to_json() const {
    json j = {{"n_layers", n_layers},
              {"n_heads", n_heads},
              {"d_model", d_model},
              {"d_mlp", d_mlp},
              {"vocab_size", vocab_size},
              {"max_positions", max_positions},
              {"eos_token_id", eos_token_id},
              {"bos_token_id", bos_token_id},
              {"activation", activation == Activation::quick_gelu ? "quick-gelu" : "gelu"},
              {"layernorm_eps", layernorm_eps}};
    return j.dump();
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw data_error(std::string("config: bad JSON: ") + e.what());
    }
    EncoderConfig c;
    try {
        c.n_layers = j.at("n_layers").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.d_model = j.at("d_model").get<int>();
        c.d_mlp = j.at("d_mlp").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_positions = j.at("max_positions").get<int>();
        c.eos_token_id = j.at("eos_token_id").get<int>();
        c.bos_token_id = j.at("bos_token_id").get<int>();
        const std::string act = j.value("activation", "quick-gelu");
        if (act == "quick-gelu") c.activation = Activation::quick_gelu;
        else if (act == "gelu") c.activation = Activation::gelu;
        else throw data_error("config: unknown activation \"" + act + "\"");
        c.layernorm_eps = j.value("layernorm_eps", 1e-5f);
    } catch (const json::exception& e) {
        throw data_error(std::string("config: missing field: ") + e.what());
    }
    c.validate();
    return c;
}

std::string EncoderConfig::fingerprint() const {
    json j = {{"n_layers", n_layers}, {"n_heads", n_heads}, {"d_model", d_model}};
    return j.dump();
}

namespace {

void check_shape(const Matrix& m, int rows, int cols, const std::string& name) {
    if (m.rows != rows || m.cols != cols)
        throw shape_error("model: tensor \"" + name + "\" has shape (" + std::to_string(m.rows) +
                          "," + std::to_string(m.cols) + "), expected (" + std::to_string(rows) +
                          "," + std::to_string(cols) + ")");
}

void check_dim(const Vector& v, int dim, const std::string& name) {
    if (v.dim() != dim)
        throw shape_error("model: tensor \"" + name + "\" has dim " + std::to_string(v.dim()) +
                          ", expected " + std::to_string(dim));
}

void check_finite(const std::vector<float>& vals, const std::string& name) {
    for (float v : vals)
        if (!std::isfinite(v)) throw nonfinite_error("model: non-finite value in \"" + name + "\"");
}

std::string layer_prefix(int l) { return "layers." + std::to_string(l) + "."; }

}  // namespace

void EncoderModel::validate() const {
    config.validate();
    const int d = config.d_model;
    check_shape(token_embedding, config.vocab_size, d, "token_embedding");
    check_shape(position_embedding, config.max_positions, d, "position_embedding");
    if (static_cast<int>(layers.size()) != config.n_layers)
        throw shape_error("model: layer count mismatch");
    for (int l = 0; l < config.n_layers; ++l) {
        const LayerWeights& w = layers[static_cast<size_t>(l)];
        const std::string p = layer_prefix(l);
        check_shape(w.wq, d, d, p + "attn.q_proj.weight");
        check_shape(w.wk, d, d, p + "attn.k_proj.weight");
        check_shape(w.wv, d, d, p + "attn.v_proj.weight");
        check_shape(w.wo, d, d, p + "attn.out_proj.weight");
        check_dim(w.bq, d, p + "attn.q_proj.bias");
        check_dim(w.bk, d, p + "attn.k_proj.bias");
        check_dim(w.bv, d, p + "attn.v_proj.bias");
        check_dim(w.bo, d, p + "attn.out_proj.bias");
        check_shape(w.fc1, config.d_mlp, d, p + "mlp.fc1.weight");
        check_shape(w.fc2, d, config.d_mlp, p + "mlp.fc2.weight");
        check_dim(w.b1, config.d_mlp, p + "mlp.fc1.bias");
        check_dim(w.b2, d, p + "mlp.fc2.bias");
        check_dim(w.ln1_g, d, p + "ln1.weight");
        check_dim(w.ln1_b, d, p + "ln1.bias");
        check_dim(w.ln2_g, d, p + "ln2.weight");
        check_dim(w.ln2_b, d, p + "ln2.bias");
        check_finite(w.wq.data, p + "attn.q_proj.weight");
        check_finite(w.wk.data, p + "attn.k_proj.weight");
        check_finite(w.wv.data, p + "attn.v_proj.weight");
        check_finite(w.wo.data, p + "attn.out_proj.weight");
        check_finite(w.fc1.data, p + "mlp.fc1.weight");
        check_finite(w.fc2.data, p + "mlp.fc2.weight");
    }
    check_dim(lnf_g, d, "final_layernorm.weight");
    check_dim(lnf_b, d, "final_layernorm.bias");
    check_finite(token_embedding.data, "token_embedding");
    check_finite(position_embedding.data, "position_embedding");
}

void save_model(const EncoderModel& m, const std::string& path) {
    m.validate();
    TensorArchive a;
    a.add_matrix("token_embedding", m.token_embedding);
    a.add_matrix("position_embedding", m.position_embedding);
    for (int l = 0; l < m.config.n_layers; ++l) {
        const LayerWeights& w = m.layers[static_cast<size_t>(l)];
        const std::string p = layer_prefix(l);
        a.add_matrix(p + "attn.q_proj.weight", w.wq);
        a.add_vector(p + "attn.q_proj.bias", w.bq);
        a.add_matrix(p + "attn.k_proj.weight", w.wk);
        a.add_vector(p + "attn.k_proj.bias", w.bk);
        a.add_matrix(p + "attn.v_proj.weight", w.wv);
        a.add_vector(p + "attn.v_proj.bias", w.bv);
        a.add_matrix(p + "attn.out_proj.weight", w.wo);
        a.add_vector(p + "attn.out_proj.bias", w.bo);
        a.add_matrix(p + "mlp.fc1.weight", w.fc1);
        a.add_vector(p + "mlp.fc1.bias", w.b1);
        a.add_matrix(p + "mlp.fc2.weight", w.fc2);
        a.add_vector(p + "mlp.fc2.bias", w.b2);
        a.add_vector(p + "ln1.weight", w.ln1_g);
        a.add_vector(p + "ln1.bias", w.ln1_b);
        a.add_vector(p + "ln2.weight", w.ln2_g);
        a.add_vector(p + "ln2.bias", w.ln2_b);
    }
    a.add_vector("final_layernorm.weight", m.lnf_g);
    a.add_vector("final_layernorm.bias", m.lnf_b);
    json meta = {{"config", json::parse(m.config.to_json())}, {"created_from", "headguard"}};
    a.set_metadata_json(meta.dump());
    a.save(path);
}

EncoderModel load_model(const std::string& path) {
    const TensorArchive a = TensorArchive::load(path);
    json meta;
    try {
        meta = json::parse(a.metadata_json());
    } catch (const json::exception& e) {
        throw data_error(std::string("model: bad metadata: ") + e.what());
    }
    if (!meta.contains("config")) throw data_error("model: metadata lacks \"config\"");
    EncoderModel m;
    m.config = EncoderConfig::from_json(meta["config"].dump());
    m.token_embedding = a.get_matrix("token_embedding");
    m.position_embedding = a.get_matrix("position_embedding");
    m.layers.resize(static_cast<size_t>(m.config.n_layers));
    for (int l = 0; l < m.config.n_layers; ++l) {
        LayerWeights& w = m.layers[static_cast<size_t>(l)];
        const std::string p = layer_prefix(l);
        w.wq = a.get_matrix(p + "attn.q_proj.weight");
        w.bq = a.get_vector(p + "attn.q_proj.bias");
        w.wk = a.get_matrix(p + "attn.k_proj.weight");
        w.bk = a.get_vector(p + "attn.k_proj.bias");
        w.wv = a.get_matrix(p + "attn.v_proj.weight");
        w.bv = a.get_vector(p + "attn.v_proj.bias");
        w.wo = a.get_matrix(p + "attn.out_proj.weight");
        w.bo = a.get_vector(p + "attn.out_proj.bias");
        w.fc1 = a.get_matrix(p + "mlp.fc1.weight");
        w.b1 = a.get_vector(p + "mlp.fc1.bias");
        w.fc2 = a.get_matrix(p + "mlp.fc2.weight");
        w.b2 = a.get_vector(p + "mlp.fc2.bias");
        w.ln1_g = a.get_vector(p + "ln1.weight");
        w.ln1_b = a.get_vector(p + "ln1.bias");
        w.ln2_g = a.get_vector(p + "ln2.weight");
        w.ln2_b = a.get_vector(p + "ln2.bias");
    }
    m.lnf_g = a.get_vector("final_layernorm.weight");
    m.lnf_b = a.get_vector("final_layernorm.bias");
    m.validate();
    return m;
}

namespace {

// Tensor fill order is part of the documented scheme: each tensor uses an
// independent substream forked from the seed by a running tensor counter.
Matrix random_matrix(Lcg64& root, uint64_t& counter, int rows, int cols, float scale) {
    Lcg64 rng = root.fork(counter++);
    Matrix m(rows, cols);
    for (float& v : m.data) v = rng.next_symmetric() * scale;
    return m;
}

Vector random_vector(Lcg64& root, uint64_t& counter, int dim, float scale, float offset = 0.0f) {
    Lcg64 rng = root.fork(counter++);
    Vector v(dim);
    for (float& x : v.data) x = rng.next_symmetric() * scale + offset;
    return v;
}

}  // namespace

EncoderModel gen_synthetic(uint64_t seed, const EncoderConfig& config) {
    config.validate();
    EncoderModel m;
    m.config = config;
    Lcg64 root(seed);
    uint64_t counter = 0;
    const float w_scale = 1.0f / std::sqrt(static_cast<float>(config.d_model));
    const float b_scale = 0.1f * w_scale;
    m.token_embedding = random_matrix(root, counter, config.vocab_size, config.d_model, w_scale);
    m.position_embedding =
        random_matrix(root, counter, config.max_positions, config.d_model, w_scale);
    m.layers.resize(static_cast<size_t>(config.n_layers));
    for (int l = 0; l < config.n_layers; ++l) {
        LayerWeights& w = m.layers[static_cast<size_t>(l)];
        w.wq = random_matrix(root, counter, config.d_model, config.d_model, w_scale);
        w.bq = random_vector(root, counter, config.d_model, b_scale);
        w.wk = random_matrix(root, counter, config.d_model, config.d_model, w_scale);
        w.bk = random_vector(root, counter, config.d_model, b_scale);
        w.wv = random_matrix(root, counter, config.d_model, config.d_model, w_scale);
        w.bv = random_vector(root, counter, config.d_model, b_scale);
        w.wo = random_matrix(root, counter, config.d_model, config.d_model, w_scale);
        w.bo = random_vector(root, counter, config.d_model, b_scale);
        w.fc1 = random_matrix(root, counter, config.d_mlp, config.d_model, w_scale);
        w.b1 = random_vector(root, counter, config.d_mlp, b_scale);
        w.fc2 = random_matrix(root, counter, config.d_model, config.d_mlp, w_scale);
        w.b2 = random_vector(root, counter, config.d_model, b_scale);
        w.ln1_g = random_vector(root, counter, config.d_model, 0.1f, 1.0f);
        w.ln1_b = random_vector(root, counter, config.d_model, 0.05f * w_scale);
        w.ln2_g = random_vector(root, counter, config.d_model, 0.1f, 1.0f);
        w.ln2_b = random_vector(root, counter, config.d_model, 0.05f * w_scale);
    }
    m.lnf_g = random_vector(root, counter, config.d_model, 0.1f, 1.0f);
    m.lnf_b = random_vector(root, counter, config.d_model, 0.05f * w_scale);
    return m;
}

PlantRanges plant_ranges(const EncoderConfig& config, double frac) {
    // Fixture convention: BOS/EOS occupy the two highest ids.
    const int usable = config.vocab_size - 2;
    if (config.bos_token_id < usable || config.eos_token_id < usable)
        throw shape_error("plant_ranges: BOS/EOS must be the top two token ids");
    int k = static_cast<int>(std::lround(frac * usable));
    k = std::max(1, std::min(k, usable / 2));
    PlantRanges r;
    r.benign_lo = 0;
    r.benign_hi = k;
    r.nsfw_lo = usable - k;
    r.nsfw_hi = usable;
    return r;
}

void plant_direction(EncoderModel& m, double frac, double scale, uint64_t seed, int categories) {
    if (categories < 1) throw shape_error("plant_direction: categories must be >= 1");
    const int d = m.config.d_model;
    const PlantRanges r = plant_ranges(m.config, frac);

    // Orthonormal seeded directions, one per category.
    Lcg64 rng(Lcg64::mix(seed) ^ 0x9d1a7ull);
    std::vector<std::vector<double>> dirs;
    for (int c = 0; c < categories; ++c) {
        std::vector<double> e(static_cast<size_t>(d));
        for (double& x : e) x = static_cast<double>(rng.next_symmetric());
        for (const auto& prev : dirs) {
            double dp = 0.0;
            for (int i = 0; i < d; ++i) dp += e[static_cast<size_t>(i)] * prev[static_cast<size_t>(i)];
            for (int i = 0; i < d; ++i) e[static_cast<size_t>(i)] -= dp * prev[static_cast<size_t>(i)];
        }
        double nrm = 0.0;
        for (double x : e) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (double& x : e) x /= nrm;
        dirs.push_back(std::move(e));
    }
    std::vector<double> base(static_cast<size_t>(d), 0.0);
    for (const auto& e : dirs)
        for (int i = 0; i < d; ++i) base[static_cast<size_t>(i)] += e[static_cast<size_t>(i)];
    double bn = 0.0;
    for (double x : base) bn += x * x;
    bn = std::sqrt(bn);
    for (double& x : base) x /= bn;

    for (int id = r.benign_lo; id < r.benign_hi; ++id) {
        float* row = m.token_embedding.row(id);
        for (int i = 0; i < d; ++i)
            row[i] -= static_cast<float>(scale * base[static_cast<size_t>(i)]);
    }
    const int span = r.nsfw_hi - r.nsfw_lo;
    for (int id = r.nsfw_lo; id < r.nsfw_hi; ++id) {
        const int c = std::min(categories - 1, (id - r.nsfw_lo) * categories / span);
        float* row = m.token_embedding.row(id);
        for (int i = 0; i < d; ++i)
            row[i] += static_cast<float>(scale * dirs[static_cast<size_t>(c)][static_cast<size_t>(i)]);
    }
}

}  // namespace hg
