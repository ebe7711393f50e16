#include "hg/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "hg/archive.hpp"
#include "hg/pipeline.hpp"

namespace hg {

using nlohmann::json;

TrainExample make_example(const TraceBundle& trace, const PromptRecord& record) {
    if (trace.capture == Capture::none)
        throw shape_error("make_example: trace has no head summaries");
    const int L = trace.model->config.n_layers;
    const int H = trace.model->config.n_heads;
    const int d = trace.model->config.d_model;
    TrainExample ex;
    ex.c = Matrix(L * H, d);
    for (int l = 0; l < L; ++l)
        std::memcpy(ex.c.row(l * H), trace.head_eos[static_cast<size_t>(l)].data.data(),
                    sizeof(float) * static_cast<size_t>(H) * d);
    ex.nsfw = record.nsfw;
    ex.weight = record.weight;
    return ex;
}

LdaStats accumulate_stats(const std::vector<TrainExample>& examples, int n_layers, int n_heads) {
    const int heads = n_layers * n_heads;
    if (examples.empty()) throw class_missing_error("accumulate_stats: no examples");
    const int d = examples[0].c.cols;
    for (const TrainExample& ex : examples)
        if (ex.c.rows != heads || ex.c.cols != d)
            throw shape_error("accumulate_stats: inconsistent summary shapes");

    LdaStats st;
    st.n_layers = n_layers;
    st.n_heads = n_heads;
    st.dim = d;
    st.mean_benign.assign(static_cast<size_t>(heads) * d, 0.0);
    st.mean_nsfw.assign(static_cast<size_t>(heads) * d, 0.0);
    st.scatter.assign(static_cast<size_t>(heads) * d * d, 0.0);

    // Pass one: weighted class means.
    for (const TrainExample& ex : examples) {
        double* mean = ex.nsfw ? st.mean_nsfw.data() : st.mean_benign.data();
        (ex.nsfw ? st.weight_nsfw : st.weight_benign) += ex.weight;
        for (int hd = 0; hd < heads; ++hd) {
            const float* row = ex.c.row(hd);
            double* m = mean + static_cast<size_t>(hd) * d;
            for (int j = 0; j < d; ++j) m[j] += ex.weight * static_cast<double>(row[j]);
        }
    }
    if (st.weight_benign <= 0.0) throw class_missing_error("accumulate_stats: no benign examples");
    if (st.weight_nsfw <= 0.0) throw class_missing_error("accumulate_stats: no nsfw examples");
    for (size_t i = 0; i < st.mean_benign.size(); ++i) st.mean_benign[i] /= st.weight_benign;
    for (size_t i = 0; i < st.mean_nsfw.size(); ++i) st.mean_nsfw[i] /= st.weight_nsfw;

    // Pass two: pooled weighted scatter about the class means.
    std::vector<double> dev(static_cast<size_t>(d));
    for (const TrainExample& ex : examples) {
        const double* mean = ex.nsfw ? st.mean_nsfw.data() : st.mean_benign.data();
        for (int hd = 0; hd < heads; ++hd) {
            const float* row = ex.c.row(hd);
            const double* m = mean + static_cast<size_t>(hd) * d;
            for (int j = 0; j < d; ++j) dev[static_cast<size_t>(j)] = static_cast<double>(row[j]) - m[j];
            double* s = st.scatter.data() + static_cast<size_t>(hd) * d * d;
            for (int a = 0; a < d; ++a) {
                const double wa = ex.weight * dev[static_cast<size_t>(a)];
                double* srow = s + static_cast<size_t>(a) * d;
                for (int b = 0; b < d; ++b) srow[b] += wa * dev[static_cast<size_t>(b)];
            }
        }
    }
    return st;
}

Vector train_feature(const LdaStats& stats, int head, RidgePolicy ridge) {
    const int d = stats.dim;
    if (head < 0 || head >= stats.head_count()) throw shape_error("train_feature: head out of range");

    Vector diff(d);
    const double* mb = stats.mean_b(head);
    const double* mm = stats.mean_m(head);
    double diff_norm_sq = 0.0;
    for (int j = 0; j < d; ++j) {
        const double v = mm[j] - mb[j];
        diff[j] = static_cast<float>(v);
        diff_norm_sq += v * v;
    }
    if (std::sqrt(diff_norm_sq) <= 1e-9)
        throw degenerate_error("train_feature: class means coincide for head " + std::to_string(head));

    Matrix sw(d, d);
    const double* s = stats.s_w(head);
    double trace = 0.0;
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) sw.at(a, b) = static_cast<float>(s[static_cast<size_t>(a) * d + b]);
        trace += s[static_cast<size_t>(a) * d + a];
    }
    const double r = ridge.use_default ? 1e-3 * trace / d : ridge.value;

    Vector x = solve_spd(sw, diff, r);
    double nrm = norm_f64(x);
    if (!(nrm > 0.0)) throw degenerate_error("train_feature: zero direction for head " + std::to_string(head));
    double sign = dot_f64(x, diff) > 0.0 ? 1.0 : -1.0;
    Vector u(d);
    for (int j = 0; j < d; ++j) u[j] = static_cast<float>(sign * static_cast<double>(x[j]) / nrm);
    return u;
}

namespace {

std::vector<TrainExample> trace_examples(const EncoderModel& model,
                                         const std::vector<PromptRecord>& records,
                                         const BpeVocab* vocab) {
    std::vector<TrainExample> out;
    out.reserve(records.size());
    for (const PromptRecord& r : records) {
        const TokenSequence seq = record_tokens(r, vocab, model.config);
        out.push_back(make_example(forward_trace(model, seq, Capture::eos_only), r));
    }
    return out;
}

// Trains every head; degenerate heads become zero rows.
void train_all_heads(const LdaStats& stats, RidgePolicy ridge, Matrix& u,
                     std::vector<uint8_t>& degenerate) {
    const int heads = stats.head_count();
    u = Matrix(heads, stats.dim);
    degenerate.assign(static_cast<size_t>(heads), 0);
    for (int hd = 0; hd < heads; ++hd) {
        try {
            const Vector uh = train_feature(stats, hd, ridge);
            std::memcpy(u.row(hd), uh.ptr(), sizeof(float) * static_cast<size_t>(stats.dim));
        } catch (const degenerate_error&) {
            degenerate[static_cast<size_t>(hd)] = 1;  // zero-feature head
        }
    }
}

}  // namespace

FeatureBank train_bank(const EncoderModel& model, const std::vector<PromptRecord>& records,
                       const BpeVocab* vocab, const std::vector<std::string>& categories,
                       RidgePolicy ridge) {
    const std::vector<TrainExample> examples = trace_examples(model, records, vocab);

    FeatureBank bank;
    bank.n_layers = model.config.n_layers;
    bank.n_heads = model.config.n_heads;
    bank.dim = model.config.d_model;
    bank.fingerprint = model.config.fingerprint();
    bank.created_from = "train_bank over " + std::to_string(records.size()) + " records";
    bank.threshold = 0.0;

    const LdaStats stats = accumulate_stats(examples, bank.n_layers, bank.n_heads);
    train_all_heads(stats, ridge, bank.u, bank.degenerate);

    for (const std::string& cat : categories) {
        std::vector<TrainExample> sub;
        for (size_t i = 0; i < records.size(); ++i) {
            const PromptRecord& r = records[i];
            if (!r.nsfw) {
                sub.push_back(examples[i]);
            } else if (std::find(r.categories.begin(), r.categories.end(), cat) !=
                       r.categories.end()) {
                sub.push_back(examples[i]);
            }
        }
        const bool has_pos =
            std::any_of(sub.begin(), sub.end(), [](const TrainExample& e) { return e.nsfw; });
        if (!has_pos) {
            bank.warnings.push_back("category \"" + cat + "\" skipped: no positive records");
            continue;
        }
        const LdaStats cstats = accumulate_stats(sub, bank.n_layers, bank.n_heads);
        Matrix cu;
        std::vector<uint8_t> cdeg;
        train_all_heads(cstats, ridge, cu, cdeg);
        bank.categories.push_back(cat);
        bank.category_u.push_back(std::move(cu));
        bank.category_degenerate.push_back(std::move(cdeg));
    }
    return bank;
}

FeatureBank augment_bank(const FeatureBank& bank, const EncoderModel& model,
                         const std::vector<PromptRecord>& base,
                         const std::vector<PromptRecord>& extra, const BpeVocab* vocab,
                         RidgePolicy ridge) {
    if (extra.empty()) throw data_error("augment_bank: no new records");
    if (bank.fingerprint != model.config.fingerprint())
        throw data_error("augment_bank: bank fingerprint does not match model");
    std::vector<PromptRecord> all = base;
    all.insert(all.end(), extra.begin(), extra.end());
    FeatureBank out = train_bank(model, all, vocab, bank.categories, ridge);
    out.created_from = "augment_bank: " + std::to_string(base.size()) + " base + " +
                       std::to_string(extra.size()) + " new records";
    return out;
}

void save_feature_bank(const FeatureBank& bank, const std::string& path) {
    TensorArchive a;
    const int H = bank.n_heads;
    for (int l = 0; l < bank.n_layers; ++l)
        for (int h = 0; h < H; ++h) {
            Vector u(bank.dim);
            std::memcpy(u.ptr(), bank.u.row(l * H + h), sizeof(float) * static_cast<size_t>(bank.dim));
            a.add_vector("u." + std::to_string(l) + "." + std::to_string(h), u);
        }
    for (size_t c = 0; c < bank.categories.size(); ++c)
        for (int l = 0; l < bank.n_layers; ++l)
            for (int h = 0; h < H; ++h) {
                Vector u(bank.dim);
                std::memcpy(u.ptr(), bank.category_u[c].row(l * H + h),
                            sizeof(float) * static_cast<size_t>(bank.dim));
                a.add_vector("u." + bank.categories[c] + "." + std::to_string(l) + "." +
                                 std::to_string(h),
                             u);
            }
    json meta = {{"threshold", bank.threshold},
                 {"categories", bank.categories},
                 {"created_from", bank.created_from},
                 {"config",
                  {{"n_layers", bank.n_layers},
                   {"n_heads", bank.n_heads},
                   {"dim", bank.dim},
                   {"fingerprint", json::parse(bank.fingerprint)}}},
                 {"warnings", bank.warnings}};
    a.set_metadata_json(meta.dump());
    a.save(path);
}

FeatureBank load_feature_bank(const std::string& path) {
    const TensorArchive a = TensorArchive::load(path);
    json meta;
    try {
        meta = json::parse(a.metadata_json());
    } catch (const json::exception& e) {
        throw data_error(std::string("bank: bad metadata: ") + e.what());
    }
    if (!meta.contains("threshold")) throw data_error("bank: metadata lacks \"threshold\"");
    if (!meta.contains("config")) throw data_error("bank: metadata lacks \"config\"");
    FeatureBank bank;
    bank.threshold = meta["threshold"].get<double>();
    if (!std::isfinite(bank.threshold)) throw data_error("bank: threshold must be finite");
    bank.n_layers = meta["config"]["n_layers"].get<int>();
    bank.n_heads = meta["config"]["n_heads"].get<int>();
    bank.dim = meta["config"]["dim"].get<int>();
    bank.fingerprint = meta["config"]["fingerprint"].dump();
    bank.created_from = meta.value("created_from", std::string());
    if (meta.contains("categories"))
        bank.categories = meta["categories"].get<std::vector<std::string>>();
    if (meta.contains("warnings")) bank.warnings = meta["warnings"].get<std::vector<std::string>>();

    auto load_set = [&](const std::string& prefix, Matrix& u, std::vector<uint8_t>& deg) {
        const int H = bank.n_heads;
        u = Matrix(bank.n_layers * H, bank.dim);
        deg.assign(static_cast<size_t>(bank.n_layers) * H, 0);
        for (int l = 0; l < bank.n_layers; ++l)
            for (int h = 0; h < H; ++h) {
                const Vector v =
                    a.get_vector(prefix + std::to_string(l) + "." + std::to_string(h));
                if (v.dim() != bank.dim) throw shape_error("bank: direction dimension mismatch");
                std::memcpy(u.row(l * H + h), v.ptr(), sizeof(float) * static_cast<size_t>(bank.dim));
                const double n = norm_f64(v);
                if (n == 0.0) {
                    deg[static_cast<size_t>(l * H + h)] = 1;
                } else if (std::abs(n - 1.0) > 1e-5) {
                    throw data_error("bank: direction " + prefix + std::to_string(l) + "." +
                                     std::to_string(h) + " is neither unit nor zero");
                }
            }
    };
    load_set("u.", bank.u, bank.degenerate);
    for (const std::string& cat : bank.categories) {
        Matrix cu;
        std::vector<uint8_t> cdeg;
        load_set("u." + cat + ".", cu, cdeg);
        bank.category_u.push_back(std::move(cu));
        bank.category_degenerate.push_back(std::move(cdeg));
    }
    return bank;
}

}  // namespace hg
