// Command-line front end: every subcommand is a thin wrapper over the library
// modules, reading/writing the archive, JSONL and CSV formats.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "hg/archive.hpp"
#include "hg/dataset.hpp"
#include "hg/detector.hpp"
#include "hg/encoder.hpp"
#include "hg/features.hpp"
#include "hg/interpret.hpp"
#include "hg/metrics.hpp"
#include "hg/model.hpp"
#include "hg/pipeline.hpp"
#include "hg/rng.hpp"
#include "hg/robustness.hpp"
#include "hg/tokenizer.hpp"

using nlohmann::json;

namespace {

struct VocabOpts {
    std::string vocab_path;
    std::string merges_path;

    std::optional<hg::BpeVocab> load() const {
        if (vocab_path.empty() && merges_path.empty()) return std::nullopt;
        if (vocab_path.empty() || merges_path.empty())
            throw hg::data_error("--vocab and --merges must be given together");
        return hg::BpeVocab::load(vocab_path, merges_path);
    }
};

void add_vocab_opts(CLI::App* cmd, VocabOpts& v) {
    cmd->add_option("--vocab", v.vocab_path, "tokenizer vocab JSON");
    cmd->add_option("--merges", v.merges_path, "tokenizer merges file");
}

int thread_count(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("HG_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw hg::data_error("cannot open \"" + path + "\" for writing");
    f << content;
    if (!f) throw hg::data_error("write failed for \"" + path + "\"");
}

json report_json(const hg::ScoreReport& rep) {
    json j = {{"score", rep.aggregate},
              {"verdict", rep.nsfw ? "nsfw" : "benign"},
              {"threshold", rep.threshold},
              {"per_layer_mean", rep.per_layer_mean},
              {"encode_us", rep.encode_us},
              {"score_us", rep.score_us}};
    if (!rep.per_category.empty()) j["per_category"] = rep.per_category;
    return j;
}

// Deterministic parallel map over records: results land in index order.
template <typename Fn>
void parallel_for_index(size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const int use = std::min<size_t>(static_cast<size_t>(threads), n);
    pool.reserve(static_cast<size_t>(use));
    for (int t = 0; t < use; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hidden-state NSFW prompt detector and interpreter"};
    app.require_subcommand(1);

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "generate a deterministic synthetic encoder");
    struct {
        uint64_t seed = 0;
        int layers = 2, heads = 2, dmodel = 8, dmlp = 16, vocab = 64, max_positions = 77;
        std::string activation = "quick-gelu";
        std::string out;
        double plant_frac = 0.0, plant_scale = 0.0;
        int plant_categories = 1;
        uint64_t plant_seed = 0;
    } g;
    gen->add_option("--seed", g.seed, "PRNG seed")->capture_default_str();
    gen->add_option("--layers", g.layers)->capture_default_str();
    gen->add_option("--heads", g.heads)->capture_default_str();
    gen->add_option("--dmodel", g.dmodel)->capture_default_str();
    gen->add_option("--dmlp", g.dmlp)->capture_default_str();
    gen->add_option("--vocab", g.vocab, "vocab size (BOS/EOS take the top two ids)")
        ->capture_default_str();
    gen->add_option("--max-positions", g.max_positions)->capture_default_str();
    gen->add_option("--activation", g.activation, "quick-gelu | gelu")->capture_default_str();
    gen->add_option("--out", g.out, "output model archive")->required();
    gen->add_option("--plant-frac", g.plant_frac,
                    "fraction of content ids per class to mark with planted directions");
    gen->add_option("--plant-scale", g.plant_scale, "planted offset magnitude");
    gen->add_option("--plant-categories", g.plant_categories)->capture_default_str();
    gen->add_option("--plant-seed", g.plant_seed)->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "train per-head directions from a dataset");
    struct {
        std::string model, data, out_bank, categories;
        double ridge = -1.0;
        VocabOpts vocab;
    } tr;
    train->add_option("--model", tr.model)->required();
    train->add_option("--data", tr.data, "JSONL dataset")->required();
    train->add_option("--out-bank", tr.out_bank)->required();
    train->add_option("--categories", tr.categories, "comma-separated category list");
    train->add_option("--ridge", tr.ridge, "explicit ridge (default: 1e-3 trace/d)");
    add_vocab_opts(train, tr.vocab);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "set the bank threshold to the max-F1 point");
    struct {
        std::string model, bank, data;
        VocabOpts vocab;
    } ca;
    cal->add_option("--model", ca.model)->required();
    cal->add_option("--bank", ca.bank)->required();
    cal->add_option("--data", ca.data)->required();
    add_vocab_opts(cal, ca.vocab);

    // score
    auto* score = app.add_subcommand("score", "score prompts against a bank");
    struct {
        std::string model, bank, text, data, layers, out;
        bool multi_category = false;
        int threads = 0;
        VocabOpts vocab;
    } sc;
    score->add_option("--model", sc.model)->required();
    score->add_option("--bank", sc.bank)->required();
    score->add_option("--text", sc.text, "single prompt");
    score->add_option("--data", sc.data, "JSONL dataset to score in batch");
    score->add_option("--layers", sc.layers, "restrict to these 1-based layers, e.g. 3,4");
    score->add_flag("--multi-category", sc.multi_category);
    score->add_option("--out", sc.out, "write JSONL here instead of stdout");
    score->add_option("--threads", sc.threads, "worker threads (default: cores, env HG_THREADS)");
    add_vocab_opts(score, sc.vocab);

    // interpret
    auto* interp = app.add_subcommand("interpret", "token attribution for one prompt");
    struct {
        std::string model, bank, text, out_prefix;
        bool deletion = false;
        int random_seeds = 20;
        uint64_t seed = 0;
        VocabOpts vocab;
    } in;
    interp->add_option("--model", in.model)->required();
    interp->add_option("--bank", in.bank)->required();
    interp->add_option("--text", in.text)->required();
    interp->add_flag("--deletion-curve", in.deletion);
    interp->add_option("--random-seeds", in.random_seeds)->capture_default_str();
    interp->add_option("--seed", in.seed)->capture_default_str();
    interp->add_option("--out-prefix", in.out_prefix, "write <prefix>.attribution.json / .deletion.csv");
    add_vocab_opts(interp, in.vocab);

    // edit
    auto* edit = app.add_subcommand("edit", "attenuate directions and emit edited embeddings");
    struct {
        std::string model, bank, text, betas = "0,0.25,0.5,0.75,1", out_prefix;
        VocabOpts vocab;
    } ed;
    edit->add_option("--model", ed.model)->required();
    edit->add_option("--bank", ed.bank)->required();
    edit->add_option("--text", ed.text)->required();
    edit->add_option("--betas", ed.betas)->capture_default_str();
    edit->add_option("--out-prefix", ed.out_prefix, "write <prefix>.sweep.csv / .embeddings archive");
    add_vocab_opts(edit, ed.vocab);

    // certify
    auto* cert = app.add_subcommand("certify", "certified robustness radius for a benign prompt");
    struct {
        std::string model, bank, text, ids;
        double r = 0.0;  // 0: default 10% of ||phi||
        int samples = 256;
        uint64_t seed = 0;
        VocabOpts vocab;
    } ce;
    cert->add_option("--model", ce.model)->required();
    cert->add_option("--bank", ce.bank)->required();
    cert->add_option("--text", ce.text);
    cert->add_option("--ids", ce.ids, "comma-separated full id sequence (BOS..EOS)");
    cert->add_option("--r", ce.r, "locality radius (default: 10% of the pooled norm)");
    cert->add_option("--samples", ce.samples)->capture_default_str();
    cert->add_option("--seed", ce.seed)->capture_default_str();
    add_vocab_opts(cert, ce.vocab);

    // redteam
    auto* red = app.add_subcommand("redteam", "greedy black-box search for detector escapes");
    struct {
        std::string model, bank, targets, out;
        int budget = 2000;
        double eps_sem = 0.0;
        uint64_t seed = 0;
        VocabOpts vocab;
    } rt;
    red->add_option("--model", rt.model)->required();
    red->add_option("--bank", rt.bank)->required();
    red->add_option("--targets", rt.targets, "JSONL of target prompts")->required();
    red->add_option("--budget", rt.budget)->capture_default_str();
    red->add_option("--eps-sem", rt.eps_sem, "pooled-embedding proximity bound")->required();
    red->add_option("--seed", rt.seed)->capture_default_str();
    red->add_option("--out", rt.out, "escapes JSONL")->required();
    add_vocab_opts(red, rt.vocab);

    // augment
    auto* aug = app.add_subcommand("augment", "retrain the bank with up-weighted new records");
    struct {
        std::string model, bank, base_data, new_data, out_bank;
        double weight = 50.0;
        double ridge = -1.0;
        VocabOpts vocab;
    } au;
    aug->add_option("--model", au.model)->required();
    aug->add_option("--bank", au.bank)->required();
    aug->add_option("--base-data", au.base_data)->required();
    aug->add_option("--new-data", au.new_data)->required();
    aug->add_option("--weight", au.weight, "weight applied to the new records")
        ->capture_default_str();
    aug->add_option("--ridge", au.ridge);
    aug->add_option("--out-bank", au.out_bank)->required();
    add_vocab_opts(aug, au.vocab);

    // eval
    auto* eval = app.add_subcommand("eval", "metrics, curves, sweeps and latency");
    struct {
        std::string model, bank, data, size_sweep, sweep_seeds = "0,1,2", out_prefix = "eval";
        bool bench = false;
        int bench_warmup = 1, bench_iters = 5;
        int threads = 0;
        VocabOpts vocab;
    } ev;
    eval->add_option("--model", ev.model)->required();
    eval->add_option("--bank", ev.bank)->required();
    eval->add_option("--data", ev.data)->required();
    eval->add_option("--size-sweep", ev.size_sweep, "training sizes, e.g. 10,50,100");
    eval->add_option("--sweep-seeds", ev.sweep_seeds)->capture_default_str();
    eval->add_flag("--bench", ev.bench, "measure per-query latency");
    eval->add_option("--bench-warmup", ev.bench_warmup)->capture_default_str();
    eval->add_option("--bench-iters", ev.bench_iters)->capture_default_str();
    eval->add_option("--threads", ev.threads);
    eval->add_option("--out-prefix", ev.out_prefix)->capture_default_str();
    add_vocab_opts(eval, ev.vocab);

    // pca-map
    auto* pca = app.add_subcommand("pca-map", "2-D projection of head summaries per class");
    struct {
        std::string model, data, out;
        int layer = 1, head = 0;
        VocabOpts vocab;
    } pc;
    pca->add_option("--model", pc.model)->required();
    pca->add_option("--data", pc.data)->required();
    pca->add_option("--layer", pc.layer, "1-based layer")->required();
    pca->add_option("--head", pc.head, "0-based head")->required();
    pca->add_option("--out", pc.out, "CSV path (default stdout)");
    add_vocab_opts(pca, pc.vocab);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            hg::EncoderConfig cfg;
            cfg.n_layers = g.layers;
            cfg.n_heads = g.heads;
            cfg.d_model = g.dmodel;
            cfg.d_mlp = g.dmlp;
            cfg.vocab_size = g.vocab;
            cfg.max_positions = g.max_positions;
            cfg.bos_token_id = g.vocab - 2;
            cfg.eos_token_id = g.vocab - 1;
            if (g.activation == "quick-gelu") cfg.activation = hg::Activation::quick_gelu;
            else if (g.activation == "gelu") cfg.activation = hg::Activation::gelu;
            else throw hg::data_error("unknown activation \"" + g.activation + "\"");
            hg::EncoderModel model = hg::gen_synthetic(g.seed, cfg);
            if (g.plant_scale != 0.0 && g.plant_frac > 0.0)
                hg::plant_direction(model, g.plant_frac, g.plant_scale, g.plant_seed,
                                    g.plant_categories);
            hg::save_model(model, g.out);
            std::cout << "wrote " << g.out << "\n";
        } else if (train->parsed()) {
            const hg::EncoderModel model = hg::load_model(tr.model);
            const auto records = hg::load_dataset_jsonl(tr.data);
            const auto vocab = tr.vocab.load();
            std::vector<std::string> cats;
            if (!tr.categories.empty()) {
                std::stringstream ss(tr.categories);
                std::string c;
                while (std::getline(ss, c, ','))
                    if (!c.empty()) cats.push_back(c);
            }
            hg::RidgePolicy ridge;
            if (tr.ridge >= 0.0) ridge = {false, tr.ridge};
            const hg::FeatureBank bank =
                hg::train_bank(model, records, vocab ? &*vocab : nullptr, cats, ridge);
            hg::save_feature_bank(bank, tr.out_bank);
            for (const std::string& w : bank.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "wrote " << tr.out_bank << "\n";
        } else if (cal->parsed()) {
            const hg::EncoderModel model = hg::load_model(ca.model);
            hg::FeatureBank bank = hg::load_feature_bank(ca.bank);
            const auto records = hg::load_dataset_jsonl(ca.data);
            const auto vocab = ca.vocab.load();
            std::vector<std::pair<double, bool>> scores;
            for (const auto& r : records) {
                const auto seq = hg::record_tokens(r, vocab ? &*vocab : nullptr, model.config);
                scores.emplace_back(
                    hg::score_from_trace(hg::forward_trace(model, seq, hg::Capture::eos_only), bank),
                    r.nsfw);
            }
            bank.threshold = hg::calibrate_threshold(scores);
            hg::save_feature_bank(bank, ca.bank);
            std::cout << "threshold " << bank.threshold << " written to " << ca.bank << "\n";
        } else if (score->parsed()) {
            const hg::EncoderModel model = hg::load_model(sc.model);
            const hg::FeatureBank bank = hg::load_feature_bank(sc.bank);
            const auto vocab = sc.vocab.load();
            std::vector<int> layers;
            if (!sc.layers.empty()) layers = parse_int_list(sc.layers);
            std::vector<hg::TokenSequence> seqs;
            if (!sc.text.empty()) {
                if (!vocab) throw hg::data_error("--text requires --vocab/--merges");
                seqs.push_back(hg::tokenize(sc.text, *vocab, model.config.max_positions));
            } else if (!sc.data.empty()) {
                for (const auto& r : hg::load_dataset_jsonl(sc.data))
                    seqs.push_back(hg::record_tokens(r, vocab ? &*vocab : nullptr, model.config));
            } else {
                throw hg::data_error("score needs --text or --data");
            }
            std::vector<json> lines(seqs.size());
            parallel_for_index(seqs.size(), thread_count(sc.threads), [&](size_t i) {
                hg::ScoreReport rep;
                if (sc.multi_category) rep = hg::score_multi_category(model, bank, seqs[i]);
                else if (!layers.empty()) rep = hg::score_layer_subset(model, bank, seqs[i], layers);
                else rep = hg::score_prompt(model, bank, seqs[i]);
                lines[i] = report_json(rep);
            });
            std::ostringstream out;
            for (const json& j : lines) out << j.dump() << '\n';
            if (sc.out.empty()) std::cout << out.str();
            else write_file(sc.out, out.str());
        } else if (interp->parsed()) {
            const hg::EncoderModel model = hg::load_model(in.model);
            const hg::FeatureBank bank = hg::load_feature_bank(in.bank);
            const auto vocab = in.vocab.load();
            if (!vocab) throw hg::data_error("interpret requires --vocab/--merges");
            const auto seq = hg::tokenize(in.text, *vocab, model.config.max_positions);
            const hg::Attribution at = hg::attribute_tokens(model, bank, seq, &*vocab);
            json j;
            j["tokens"] = json::array();
            for (size_t i = 0; i < at.ids.size(); ++i) {
                j["tokens"].push_back({{"position", i},
                                       {"id", at.ids[i]},
                                       {"token", at.tokens[i]},
                                       {"special", static_cast<bool>(at.special[i])},
                                       {"score", at.score[i]}});
            }
            j["ranking"] = at.ranking;
            std::string deletion_csv;
            if (in.deletion) {
                const hg::DeletionCurve curve = hg::deletion_curve(model, bank, *vocab, seq, at,
                                                                   in.random_seeds, in.seed);
                deletion_csv = hg::deletion_curve_csv(curve);
            }
            if (in.out_prefix.empty()) {
                std::cout << j.dump(2) << "\n";
                if (!deletion_csv.empty()) std::cout << deletion_csv;
            } else {
                write_file(in.out_prefix + ".attribution.json", j.dump(2) + "\n");
                if (!deletion_csv.empty()) write_file(in.out_prefix + ".deletion.csv", deletion_csv);
                std::cout << "wrote " << in.out_prefix << ".attribution.json\n";
            }
        } else if (edit->parsed()) {
            const hg::EncoderModel model = hg::load_model(ed.model);
            const hg::FeatureBank bank = hg::load_feature_bank(ed.bank);
            const auto vocab = ed.vocab.load();
            if (!vocab) throw hg::data_error("edit requires --vocab/--merges");
            const auto seq = hg::tokenize(ed.text, *vocab, model.config.max_positions);
            const std::vector<double> betas = parse_double_list(ed.betas);
            const auto rows = hg::beta_sweep(model, bank, seq, betas);
            const std::string csv = hg::beta_sweep_csv(rows);
            if (ed.out_prefix.empty()) {
                std::cout << csv;
            } else {
                write_file(ed.out_prefix + ".sweep.csv", csv);
                hg::TensorArchive a;
                for (double beta : betas) {
                    const hg::EditedEmbedding e = hg::edit_embedding(model, bank, seq, beta);
                    std::ostringstream name;
                    name << "cond_emb." << beta;
                    a.add_matrix(name.str(), e.embedding);
                }
                a.save(ed.out_prefix + ".embeddings");
                std::cout << "wrote " << ed.out_prefix << ".sweep.csv\n";
            }
        } else if (cert->parsed()) {
            const hg::EncoderModel model = hg::load_model(ce.model);
            const hg::FeatureBank bank = hg::load_feature_bank(ce.bank);
            hg::TokenSequence seq;
            if (!ce.ids.empty()) {
                seq = hg::sequence_from_ids(parse_int_list(ce.ids), model.config.eos_token_id);
            } else if (!ce.text.empty()) {
                const auto vocab = ce.vocab.load();
                if (!vocab) throw hg::data_error("certify --text requires --vocab/--merges");
                seq = hg::tokenize(ce.text, *vocab, model.config.max_positions);
            } else {
                throw hg::data_error("certify needs --text or --ids");
            }
            double r = ce.r;
            if (r <= 0.0) {
                const auto trace = hg::forward_trace(model, seq, hg::Capture::eos_only);
                r = 0.1 * hg::norm_f64(trace.pooled);
            }
            const hg::LipschitzEstimate est =
                hg::estimate_lipschitz(model, bank, seq, r, ce.samples, ce.seed);
            hg::RobustnessCertificate c = hg::certify(model, bank, seq, r, est.k_hat);
            c.k_samples = est.n_valid;
            c.k_raw_max_ratio = est.raw_max_ratio;
            std::cout << c.to_json() << "\n";
        } else if (red->parsed()) {
            const hg::EncoderModel model = hg::load_model(rt.model);
            const hg::FeatureBank bank = hg::load_feature_bank(rt.bank);
            const auto vocab = rt.vocab.load();
            const auto targets = hg::load_dataset_jsonl(rt.targets);
            std::vector<hg::PromptRecord> escapes;
            int idx = 0;
            for (const auto& rec : targets) {
                const auto seq = hg::record_tokens(rec, vocab ? &*vocab : nullptr, model.config);
                const hg::RedTeamResult res = hg::red_team_search(
                    model, bank, seq, rt.budget, rt.eps_sem,
                    hg::Lcg64::mix(rt.seed) ^ static_cast<uint64_t>(idx));
                std::cerr << "target " << idx << ": " << (res.escaped ? "escaped" : "held") << " after "
                          << res.queries << " queries (score " << res.final_score << ")\n";
                if (res.escaped) {
                    hg::PromptRecord e;
                    e.ids = res.adversarial_ids;
                    e.nsfw = true;
                    e.categories = rec.categories;
                    e.source = "redteam";
                    escapes.push_back(std::move(e));
                }
                ++idx;
            }
            hg::save_dataset_jsonl(escapes, rt.out);
            std::cout << escapes.size() << " escapes written to " << rt.out << "\n";
        } else if (aug->parsed()) {
            const hg::EncoderModel model = hg::load_model(au.model);
            const hg::FeatureBank bank = hg::load_feature_bank(au.bank);
            const auto vocab = au.vocab.load();
            const auto base = hg::load_dataset_jsonl(au.base_data);
            auto extra = hg::load_dataset_jsonl(au.new_data);
            for (auto& r : extra) r.weight = au.weight;
            hg::RidgePolicy ridge;
            if (au.ridge >= 0.0) ridge = {false, au.ridge};
            hg::FeatureBank out = hg::augment_bank(bank, model, base, extra,
                                                   vocab ? &*vocab : nullptr, ridge);
            out.threshold = bank.threshold;
            hg::save_feature_bank(out, au.out_bank);
            std::cout << "wrote " << au.out_bank << "\n";
        } else if (eval->parsed()) {
            const hg::EncoderModel model = hg::load_model(ev.model);
            const hg::FeatureBank bank = hg::load_feature_bank(ev.bank);
            const auto vocab = ev.vocab.load();
            const auto records = hg::load_dataset_jsonl(ev.data);
            std::vector<hg::TokenSequence> seqs;
            for (const auto& r : records)
                seqs.push_back(hg::record_tokens(r, vocab ? &*vocab : nullptr, model.config));
            std::vector<std::pair<double, bool>> scores(records.size());
            parallel_for_index(records.size(), thread_count(ev.threads), [&](size_t i) {
                scores[i] = {hg::score_from_trace(
                                 hg::forward_trace(model, seqs[i], hg::Capture::eos_only), bank),
                             records[i].nsfw};
            });
            hg::MetricsRow row = hg::compute_metrics(scores, bank.threshold);
            row.tag = ev.data;
            if (ev.bench) {
                const hg::LatencyReport lat =
                    hg::bench_latency(model, bank, seqs, ev.bench_warmup, ev.bench_iters);
                row.time_per_query_us = lat.encode_us_median + lat.score_us_median;
                std::cerr << "bench: encode " << lat.encode_us_median << " us, score "
                          << lat.score_us_median << " us (median of " << lat.samples << ")\n";
            }
            write_file(ev.out_prefix + ".metrics.csv",
                       hg::MetricsRow::csv_header() + "\n" + row.csv_line() + "\n");
            write_file(ev.out_prefix + ".roc.csv",
                       hg::curve_csv(hg::roc_points(scores), "fpr", "tpr"));
            write_file(ev.out_prefix + ".pr.csv",
                       hg::curve_csv(hg::pr_points(scores), "recall", "precision"));
            if (!ev.size_sweep.empty()) {
                const std::vector<int> sizes = parse_int_list(ev.size_sweep);
                std::vector<uint64_t> seeds;
                for (int s : parse_int_list(ev.sweep_seeds)) seeds.push_back(static_cast<uint64_t>(s));
                const auto sweep =
                    hg::size_sweep(model, records, sizes, seeds, vocab ? &*vocab : nullptr);
                std::string csv = "size,seed," + hg::MetricsRow::csv_header() + "\n";
                for (const auto& sr : sweep)
                    csv += std::to_string(sr.size) + "," + std::to_string(sr.seed) + "," +
                           sr.metrics.csv_line() + "\n";
                write_file(ev.out_prefix + ".sweep.csv", csv);
            }
            std::cout << hg::MetricsRow::csv_header() << "\n" << row.csv_line() << "\n";
        } else if (pca->parsed()) {
            const hg::EncoderModel model = hg::load_model(pc.model);
            const auto vocab = pc.vocab.load();
            const auto records = hg::load_dataset_jsonl(pc.data);
            if (pc.layer < 1 || pc.layer > model.config.n_layers)
                throw hg::shape_error("pca-map: layer out of [1,L]");
            if (pc.head < 0 || pc.head >= model.config.n_heads)
                throw hg::shape_error("pca-map: head out of [0,H)");
            std::vector<hg::Vector> points;
            for (const auto& r : records) {
                const auto seq = hg::record_tokens(r, vocab ? &*vocab : nullptr, model.config);
                const auto trace = hg::forward_trace(model, seq, hg::Capture::eos_only);
                points.push_back(trace.head_summary(pc.layer - 1, pc.head));
            }
            const hg::Pca2d p = hg::pca_2d(points);
            std::ostringstream csv;
            csv.precision(10);
            csv << "x,y,label\n";
            for (size_t i = 0; i < records.size(); ++i)
                csv << p.projection.at(static_cast<int>(i), 0) << ','
                    << p.projection.at(static_cast<int>(i), 1) << ','
                    << (records[i].nsfw ? "nsfw" : "benign") << '\n';
            if (pc.out.empty()) std::cout << csv.str();
            else write_file(pc.out, csv.str());
        }
    } catch (const hg::data_error& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const hg::error& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
