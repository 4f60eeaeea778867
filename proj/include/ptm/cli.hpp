#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptm/analysis.hpp"
#include "ptm/baseline.hpp"
#include "ptm/corpus.hpp"
#include "ptm/errors.hpp"
#include "ptm/ledegen.hpp"
#include "ptm/sampler.hpp"
#include "ptm/samples_io.hpp"
#include "ptm/text.hpp"

namespace ptm::cli {

namespace fs = std::filesystem;

struct input_paths {
    std::optional<fs::path> articles, stopwords, corpus, samples, embeddings, lexicon;
    std::optional<fs::path> reports, code_table, lede_config, truth, pairs, ledes;
};

struct run_config {
    input_paths paths;
    fs::path output_dir = "out";
    std::uint64_t seed = 0;

    std::string keyword = "crime";
    std::uint64_t min_count = 5;

    hyper_params sampler;
    std::uint32_t chains = 1;

    std::optional<std::uint32_t> clusters; // defaults to sampler.n_types
    std::uint32_t max_iter = 100;
    double tol = 1e-6;

    analysis_options analysis;
    std::size_t ngram = 2;

    std::uint32_t cluster_count() const { return clusters.value_or(sampler.n_types); }
    hyper_params sampler_params() const {
        auto hp = sampler;
        hp.seed = seed;
        return hp;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw config_error(where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!known.count(key)) throw config_error("unknown config key '" + where + "." + key + "'");
}

template <class T>
void read_into(const nlohmann::json& obj, const char* key, T& target, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config key '" + where + "." + key + "' has the wrong type");
    }
}

} // namespace detail

/// Parses a JSON run configuration; relative paths resolve against base_dir.
inline run_config parse_config(std::string_view text, const fs::path& base_dir) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    detail::reject_unknown_keys(j, {"seed", "output_dir", "paths", "ingest", "sampler", "baseline", "analysis", "lede"}, "config");

    run_config cfg;
    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    detail::read_into(j, "seed", cfg.seed, "config");
    if (j.contains("output_dir")) {
        std::string out;
        detail::read_into(j, "output_dir", out, "config");
        cfg.output_dir = resolve(out);
    }

    if (j.contains("paths")) {
        const auto& p = j["paths"];
        const std::vector<std::pair<const char*, std::optional<fs::path>*>> fields{
            {"articles", &cfg.paths.articles}, {"stopwords", &cfg.paths.stopwords},
            {"corpus", &cfg.paths.corpus},     {"samples", &cfg.paths.samples},
            {"embeddings", &cfg.paths.embeddings}, {"lexicon", &cfg.paths.lexicon},
            {"reports", &cfg.paths.reports},   {"code_table", &cfg.paths.code_table},
            {"lede_config", &cfg.paths.lede_config}, {"truth", &cfg.paths.truth},
            {"pairs", &cfg.paths.pairs},       {"ledes", &cfg.paths.ledes}};
        std::set<std::string> known;
        for (const auto& [k, _] : fields) known.insert(k);
        detail::reject_unknown_keys(p, known, "paths");
        for (const auto& [k, target] : fields) {
            if (!p.contains(k)) continue;
            std::string v;
            detail::read_into(p, k, v, "paths");
            *target = resolve(v);
        }
    }

    if (j.contains("ingest")) {
        const auto& g = j["ingest"];
        detail::reject_unknown_keys(g, {"keyword", "min_count"}, "ingest");
        detail::read_into(g, "keyword", cfg.keyword, "ingest");
        detail::read_into(g, "min_count", cfg.min_count, "ingest");
    }

    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        detail::reject_unknown_keys(s, {"alpha", "beta", "h_p", "h_t", "gamma", "topics", "types", "sweeps", "burn_in",
                                        "lag", "kernel", "chains"},
                                    "sampler");
        auto& hp = cfg.sampler;
        detail::read_into(s, "alpha", hp.alpha, "sampler");
        detail::read_into(s, "beta", hp.beta, "sampler");
        detail::read_into(s, "h_p", hp.h_p, "sampler");
        detail::read_into(s, "h_t", hp.h_t, "sampler");
        detail::read_into(s, "gamma", hp.gamma, "sampler");
        detail::read_into(s, "topics", hp.n_topics, "sampler");
        detail::read_into(s, "types", hp.n_types, "sampler");
        detail::read_into(s, "sweeps", hp.n_sweeps, "sampler");
        detail::read_into(s, "burn_in", hp.burn_in, "sampler");
        detail::read_into(s, "lag", hp.sample_lag, "sampler");
        detail::read_into(s, "chains", cfg.chains, "sampler");
        if (s.contains("kernel")) {
            std::string k;
            detail::read_into(s, "kernel", k, "sampler");
            if (k == "exact") hp.kernel = type_kernel::exact;
            else if (k == "static") hp.kernel = type_kernel::static_counts;
            else throw config_error("sampler.kernel must be 'exact' or 'static'");
        }
    }

    if (j.contains("baseline")) {
        const auto& b = j["baseline"];
        detail::reject_unknown_keys(b, {"clusters", "max_iter", "tol"}, "baseline");
        if (b.contains("clusters")) {
            std::uint32_t c = 0;
            detail::read_into(b, "clusters", c, "baseline");
            cfg.clusters = c;
        }
        detail::read_into(b, "max_iter", cfg.max_iter, "baseline");
        detail::read_into(b, "tol", cfg.tol, "baseline");
    }

    if (j.contains("analysis")) {
        const auto& a = j["analysis"];
        detail::reject_unknown_keys(a, {"min_count", "top_n"}, "analysis");
        detail::read_into(a, "min_count", cfg.analysis.min_count, "analysis");
        detail::read_into(a, "top_n", cfg.analysis.top_n, "analysis");
    }

    if (j.contains("lede")) {
        const auto& l = j["lede"];
        detail::reject_unknown_keys(l, {"ngram"}, "lede");
        detail::read_into(l, "ngram", cfg.ngram, "lede");
    }
    return cfg;
}

inline run_config load_config(const fs::path& path) {
    if (!fs::exists(path)) throw config_error("config file not found: " + path.string());
    return parse_config(read_file(path), path.parent_path());
}

inline fs::path require_input(const std::optional<fs::path>& p, const char* what) {
    if (!p) throw config_error(std::string("no ") + what + " path configured");
    if (!fs::exists(*p)) throw config_error(std::string(what) + " not found: " + p->string());
    return *p;
}

inline void prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw config_error("cannot create output directory " + dir.string());
}

inline fs::path corpus_path(const run_config& cfg) { return cfg.paths.corpus.value_or(cfg.output_dir / "corpus.json"); }

inline fs::path samples_path(const run_config& cfg) {
    if (cfg.paths.samples) return *cfg.paths.samples;
    const auto single = cfg.output_dir / "samples.bin";
    if (fs::exists(single)) return single;
    return cfg.output_dir / "samples.chain0.bin";
}

inline void log(const std::string& line) { std::cerr << line << '\n'; }

inline void cmd_ingest(const run_config& cfg) {
    const auto articles = require_input(cfg.paths.articles, "articles");
    const auto stop_path = require_input(cfg.paths.stopwords, "stopwords");
    if (cfg.keyword.empty() || cfg.keyword != to_lower(cfg.keyword))
        throw config_error("keyword must be non-empty lowercase");
    prepare_output(cfg.output_dir);

    const auto docs = load_collection(articles);
    log("ingest: loaded " + std::to_string(docs.size()) + " documents");
    const auto with_kw = filter_keyword(docs, cfg.keyword);
    log("ingest: " + std::to_string(with_kw.size()) + " after keyword filter '" + cfg.keyword + "'");
    const auto weekday = filter_weekday(with_kw);
    log("ingest: " + std::to_string(weekday.size()) + " after weekday filter");
    const auto c = build_corpus(weekday, load_stopwords(stop_path), cfg.min_count);
    log("ingest: corpus has " + std::to_string(c.n_documents()) + " documents, " + std::to_string(c.n_paragraphs()) +
        " paragraphs, " + std::to_string(c.n_tokens()) + " tokens, vocabulary " + std::to_string(c.vocab().size()));
    write_file(cfg.output_dir / "corpus.json", serialize_corpus(c));
}

inline void cmd_train(const run_config& cfg) {
    const auto hp = cfg.sampler_params();
    hp.validate();
    if (cfg.chains < 1) throw config_error("chains must be >= 1");
    const auto cpath = corpus_path(cfg);
    if (!fs::exists(cpath)) throw config_error("corpus not found: " + cpath.string());
    prepare_output(cfg.output_dir);
    const auto c = load_corpus(cpath);
    log("train: " + std::to_string(c.n_tokens()) + " tokens, K=" + std::to_string(hp.n_topics) +
        ", T=" + std::to_string(hp.n_types) + ", " + std::to_string(hp.n_sweeps) + " sweeps, " +
        std::to_string(cfg.chains) + " chain(s)");

    if (cfg.chains == 1) {
        const std::uint32_t every = std::max<std::uint32_t>(1, hp.n_sweeps / 10);
        const auto ps = run(c, hp, [&](std::uint32_t s, const sampler_state& st) {
            if (s % every == 0 || s == hp.n_sweeps)
                log("train: sweep " + std::to_string(s) + " logprob " + format_double(joint_log_prob(st)));
        });
        save_samples(cfg.output_dir / "samples.bin", ps);
        write_file(cfg.output_dir / "logprob.csv", log_prob_csv(ps));
        log("train: retained " + std::to_string(ps.samples.size()) + " samples");
        return;
    }
    const auto all = run_chains(c, hp, cfg.chains);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto tag = "chain" + std::to_string(i);
        save_samples(cfg.output_dir / ("samples." + tag + ".bin"), all[i]);
        write_file(cfg.output_dir / ("logprob." + tag + ".csv"), log_prob_csv(all[i]));
        log("train: " + tag + " retained " + std::to_string(all[i].samples.size()) + " samples, final logprob " +
            format_double(all[i].log_prob.back()));
    }
}

inline void cmd_analyze(const run_config& cfg) {
    const auto cpath = corpus_path(cfg);
    const auto spath = samples_path(cfg);
    if (!fs::exists(cpath)) throw config_error("corpus not found: " + cpath.string());
    if (!fs::exists(spath)) throw config_error("samples not found: " + spath.string());
    pos_lexicon lex;
    if (cfg.paths.lexicon) lex = load_lexicon(require_input(cfg.paths.lexicon, "lexicon"));
    const auto dir = cfg.output_dir / "report";
    prepare_output(dir);

    const auto c = load_corpus(cpath);
    const auto ps = load_samples(spath);
    const auto report = analyze(ps, c, cfg.analysis, lex);
    write_report(dir, report, c);
    log("analyze: first-paragraph entropy " + format_double(report.first_entropy) + " nats over " +
        std::to_string(ps.samples.size()) + " samples; report in " + dir.string());
}

inline void cmd_baseline(const run_config& cfg) {
    const auto cpath = corpus_path(cfg);
    if (!fs::exists(cpath)) throw config_error("corpus not found: " + cpath.string());
    const auto emb_path = require_input(cfg.paths.embeddings, "embeddings");
    const auto dir = cfg.output_dir / "baseline";
    prepare_output(dir);

    const auto c = load_corpus(cpath);
    const auto emb = load_embeddings(emb_path);
    if (emb.duplicates) log("baseline: " + std::to_string(emb.duplicates) + " duplicate embedding entries (last kept)");

    std::vector<vec> points;
    std::string flagged = "doc_id,paragraph_index\n";
    std::size_t n_flagged = 0;
    for (const auto& d : c.documents())
        for (std::size_t p = 0; p < d.paragraphs.size(); ++p) {
            auto pv = paragraph_vector(d.paragraphs[p], c.vocab(), emb.table);
            if (pv.no_known_words) {
                flagged += csv_line({d.id, std::to_string(p)});
                ++n_flagged;
            }
            points.push_back(std::move(pv.vector));
        }

    const auto t = cfg.cluster_count();
    const auto res = kmeans(points, t, cfg.seed, cfg.max_iter, cfg.tol);
    const auto types = split_by_document(res.assignment, c);
    write_structure_report(dir, types, t, c, "cluster");
    fs::rename(dir / "paragraph_types.csv", dir / "clusters.csv");
    write_file(dir / "zero_vector_paragraphs.csv", flagged);

    std::string summary = "objective " + format_double(res.objective) + "\niterations " +
                          std::to_string(res.iterations) + "\nzero_vector_paragraphs " + std::to_string(n_flagged) + "\n";
    write_file(dir / "summary.txt", summary);
    log("baseline: objective " + format_double(res.objective) + " after " + std::to_string(res.iterations) +
        " iterations; " + std::to_string(n_flagged) + " paragraphs without known words");
}

/// Returns the process exit code: nonzero when no lede could be generated.
inline int cmd_lede_generate(const run_config& cfg) {
    const auto reports_path = require_input(cfg.paths.reports, "reports");
    const auto table_path = require_input(cfg.paths.code_table, "code_table");
    const auto config_path = require_input(cfg.paths.lede_config, "lede_config");
    prepare_output(cfg.output_dir);

    const auto res = lede::load_lede_config(config_path);
    const auto table = lede::load_code_table(table_path);
    const auto batch = lede::parse_reports(reports_path);
    for (const auto& e : batch.errors) log("lede: skipped row at line " + std::to_string(e.line) + ": " + e.message);

    std::string jsonl;
    std::size_t ok = 0, failed = batch.errors.size();
    for (const auto& r : batch.reports) {
        try {
            const auto result = lede::fill_slots(r, res, table);
            jsonl += lede::to_json(result).dump() + "\n";
            ++ok;
        } catch (const validation_error& e) {
            log("lede: report " + r.id + ": " + e.what());
            ++failed;
        }
    }
    write_file(cfg.output_dir / "ledes.jsonl", jsonl);
    log("lede: generated " + std::to_string(ok) + " ledes, " + std::to_string(failed) + " failed");
    return ok == 0 && failed > 0 ? 1 : 0;
}

inline std::vector<lede::eval_pair> load_pairs_csv(const fs::path& path) {
    const auto rows = parse_csv(read_file(path));
    if (rows.empty()) throw parse_error("pairs file has no header", 1);
    const csv_header h(rows.front());
    const auto ct = h.require("crime_type"), gen = h.require("generated"), tr = h.require("truth");
    std::vector<lede::eval_pair> pairs;
    for (std::size_t i = 1; i < rows.size(); ++i)
        pairs.push_back({field_or_empty(rows[i], ct), field_or_empty(rows[i], gen), field_or_empty(rows[i], tr)});
    return pairs;
}

/// Joins generated ledes (JSON lines) with a truth CSV (id, truth) by report id.
inline std::vector<lede::eval_pair> join_ledes_with_truth(const fs::path& ledes_path, const fs::path& truth_path) {
    const auto rows = parse_csv(read_file(truth_path));
    if (rows.empty()) throw parse_error("truth file has no header", 1);
    const csv_header h(rows.front());
    const auto id_col = h.require("id"), truth_col = h.require("truth");
    std::map<std::string, std::string> truth;
    for (std::size_t i = 1; i < rows.size(); ++i) truth[field_or_empty(rows[i], id_col)] = field_or_empty(rows[i], truth_col);

    std::vector<lede::eval_pair> pairs;
    const auto lines = read_lines(ledes_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error&) {
            throw parse_error("invalid lede JSON", i + 1);
        }
        const auto id = j.value("id", std::string());
        auto it = truth.find(id);
        if (it == truth.end()) {
            log("lede eval: no truth for report " + id + "; skipped");
            continue;
        }
        pairs.push_back({j.value("crime_type", std::string()), j.value("text", std::string()), it->second});
    }
    return pairs;
}

inline void cmd_lede_eval(const run_config& cfg) {
    std::vector<lede::eval_pair> pairs;
    if (cfg.paths.pairs) {
        pairs = load_pairs_csv(require_input(cfg.paths.pairs, "pairs"));
    } else {
        const auto ledes = cfg.paths.ledes.value_or(cfg.output_dir / "ledes.jsonl");
        if (!fs::exists(ledes)) throw config_error("ledes not found: " + ledes.string());
        pairs = join_ledes_with_truth(ledes, require_input(cfg.paths.truth, "truth"));
    }
    prepare_output(cfg.output_dir);
    const auto ev = lede::evaluate_corpus(pairs, cfg.ngram);
    write_file(cfg.output_dir / "eval.csv", lede::evaluation_csv(ev));
    log("lede eval: " + std::to_string(cfg.ngram) + "-gram overlap " + format_double(ev.overall) + " over " +
        std::to_string(ev.per_type.size()) + " crime types");
}

/// Entry point shared by the ptm binary and the tests.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Paragraph topic model and crime lede toolkit"};
    app.require_subcommand(1);

    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, keyword;
    std::optional<double> gamma;
    std::optional<std::uint32_t> topics, types, sweeps, burn_in, lag, chains;
    std::optional<std::size_t> ngram;

    app.add_option("--config", config_file, "JSON run configuration");
    app.add_option("--seed", seed, "Seed for all randomness");
    app.add_option("--out", out, "Output directory");
    app.add_option("--keyword", keyword, "Keyword filter for ingest");
    app.add_option("--gamma", gamma, "Switching probability");
    app.add_option("--topics", topics, "Number of word topics K");
    app.add_option("--types", types, "Number of paragraph types T");
    app.add_option("--sweeps", sweeps, "Gibbs sweeps");
    app.add_option("--burn-in", burn_in, "Sweeps discarded before retaining samples");
    app.add_option("--lag", lag, "Sweeps between retained samples");
    app.add_option("--ngram", ngram, "N-gram order for lede evaluation");
    app.add_option("--chains", chains, "Independent chains for train");

    auto* ingest = app.add_subcommand("ingest", "Filter articles and build the corpus");
    auto* train = app.add_subcommand("train", "Run the Gibbs sampler");
    auto* analyze_cmd = app.add_subcommand("analyze", "Write the analysis report");
    auto* baseline = app.add_subcommand("baseline", "Cluster mean paragraph embeddings");
    auto* lede_cmd = app.add_subcommand("lede", "Generate or evaluate ledes");
    lede_cmd->require_subcommand(1);
    auto* generate = lede_cmd->add_subcommand("generate", "Fill templates from crime reports");
    auto* eval = lede_cmd->add_subcommand("eval", "Score ledes by n-gram overlap");
    for (auto* sub : {ingest, train, analyze_cmd, baseline, generate, eval}) sub->fallthrough();
    lede_cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        run_config cfg = config_file.empty() ? run_config{} : load_config(config_file);
        if (seed) cfg.seed = *seed;
        if (out) cfg.output_dir = *out;
        if (keyword) cfg.keyword = *keyword;
        if (gamma) cfg.sampler.gamma = *gamma;
        if (topics) cfg.sampler.n_topics = *topics;
        if (types) cfg.sampler.n_types = *types;
        if (sweeps) cfg.sampler.n_sweeps = *sweeps;
        if (burn_in) cfg.sampler.burn_in = *burn_in;
        if (lag) cfg.sampler.sample_lag = *lag;
        if (chains) cfg.chains = *chains;
        if (ngram) cfg.ngram = *ngram;

        if (*ingest) cmd_ingest(cfg);
        else if (*train) cmd_train(cfg);
        else if (*analyze_cmd) cmd_analyze(cfg);
        else if (*baseline) cmd_baseline(cfg);
        else if (*generate) return cmd_lede_generate(cfg);
        else if (*eval) cmd_lede_eval(cfg);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace ptm::cli
