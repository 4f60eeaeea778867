#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptm/corpus.hpp"
#include "ptm/errors.hpp"
#include "ptm/sampler.hpp"
#include "ptm/text.hpp"

namespace ptm {

/// Per document, the type of each paragraph in order.
using type_assignments = std::vector<std::vector<std::uint32_t>>;

/// Word id of every token in sampler order (document, paragraph, token).
inline std::vector<word_id> flatten_words(const corpus& c) {
    std::vector<word_id> out;
    out.reserve(c.n_tokens());
    for (const auto& d : c.documents())
        for (const auto& p : d.paragraphs) out.insert(out.end(), p.begin(), p.end());
    return out;
}

/// Global paragraph index of every token in sampler order.
inline std::vector<std::uint32_t> flatten_paragraph_of_token(const corpus& c) {
    std::vector<std::uint32_t> out;
    out.reserve(c.n_tokens());
    std::uint32_t g = 0;
    for (const auto& d : c.documents())
        for (const auto& p : d.paragraphs) {
            out.insert(out.end(), p.size(), g);
            ++g;
        }
    return out;
}

inline void check_samples_match(const posterior_samples& ps, const corpus& c) {
    if (ps.samples.empty()) throw validation_error("no retained samples");
    if (ps.vocab_size != c.vocab().size()) throw validation_error("samples were drawn for a different vocabulary");
    for (const auto& s : ps.samples)
        if (s.types.size() != c.n_paragraphs() || s.topics.size() != c.n_tokens() ||
            s.switches.size() != c.n_tokens())
            throw validation_error("samples do not match the corpus shape");
}

/// Splits a flat per-paragraph vector into per-document lists.
inline type_assignments split_by_document(const std::vector<std::uint32_t>& flat, const corpus& c) {
    if (flat.size() != c.n_paragraphs()) throw validation_error("paragraph count mismatch");
    type_assignments out;
    std::size_t g = 0;
    for (const auto& d : c.documents()) {
        auto& row = out.emplace_back();
        for (std::size_t p = 0; p < d.paragraphs.size(); ++p) row.push_back(flat[g++]);
    }
    return out;
}

/// Majority vote per paragraph across retained samples; ties go to the lowest type.
inline type_assignments majority_types(const posterior_samples& ps, const corpus& c) {
    check_samples_match(ps, c);
    const std::uint32_t T = ps.params.n_types;
    std::vector<std::uint32_t> flat(c.n_paragraphs());
    std::vector<std::uint32_t> votes(T);
    for (std::size_t g = 0; g < flat.size(); ++g) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& s : ps.samples) ++votes[s.types[g]];
        flat[g] = static_cast<std::uint32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return split_by_document(flat, c);
}

struct transition_result {
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::vector<double>> matrix; // row-stochastic, or all-zero when empty_row
    std::vector<bool> empty_row;
};

inline transition_result transition_matrix(const type_assignments& assignments, std::uint32_t t) {
    transition_result r;
    r.counts.assign(t, std::vector<std::uint64_t>(t, 0));
    r.matrix.assign(t, std::vector<double>(t, 0.0));
    r.empty_row.assign(t, true);
    for (const auto& doc : assignments) {
        for (auto x : doc)
            if (x >= t) throw validation_error("type id out of range");
        for (std::size_t i = 1; i < doc.size(); ++i) ++r.counts[doc[i - 1]][doc[i]];
    }
    for (std::uint32_t i = 0; i < t; ++i) {
        std::uint64_t total = 0;
        for (auto v : r.counts[i]) total += v;
        if (total == 0) continue;
        r.empty_row[i] = false;
        for (std::uint32_t j = 0; j < t; ++j)
            r.matrix[i][j] = static_cast<double>(r.counts[i][j]) / static_cast<double>(total);
    }
    return r;
}

inline std::vector<double> first_paragraph_distribution(const type_assignments& assignments, std::uint32_t t) {
    std::vector<double> q(t, 0.0);
    std::size_t n = 0;
    for (const auto& doc : assignments) {
        if (doc.empty()) continue;
        if (doc.front() >= t) throw validation_error("type id out of range");
        q[doc.front()] += 1.0;
        ++n;
    }
    if (n == 0) throw validation_error("no documents for first-paragraph distribution");
    for (auto& v : q) v /= static_cast<double>(n);
    return q;
}

/// Entropy in nats of the first paragraph's type across documents.
inline double first_paragraph_entropy(const type_assignments& assignments, std::uint32_t t) {
    double h = 0.0;
    for (double v : first_paragraph_distribution(assignments, t))
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

struct switch_word_entry {
    std::string word;
    std::uint64_t count = 0; // token instances in the corpus
    double p_doc = 0.0;
};

struct switch_word_table {
    std::vector<switch_word_entry> descending; // by p_doc, ties by word
    std::vector<switch_word_entry> ascending;
};

/// Fraction of each word's tokens assigned s=doc, averaged over samples,
/// for words occurring more than min_count times.
inline switch_word_table switch_word_posterior(const posterior_samples& ps, const corpus& c, std::uint64_t min_count) {
    check_samples_match(ps, c);
    const auto words = flatten_words(c);
    const std::size_t V = c.vocab().size();
    std::vector<std::uint64_t> instances(V, 0), doc_hits(V, 0);
    for (auto w : words) ++instances[w];
    for (const auto& s : ps.samples)
        for (std::size_t i = 0; i < words.size(); ++i)
            if (s.switches[i] == switch_value::doc) ++doc_hits[words[i]];

    switch_word_table table;
    const double n_samples = static_cast<double>(ps.samples.size());
    for (std::size_t w = 0; w < V; ++w) {
        if (instances[w] <= min_count) continue;
        table.descending.push_back({c.vocab().word(static_cast<word_id>(w)), instances[w],
                                    static_cast<double>(doc_hits[w]) / (static_cast<double>(instances[w]) * n_samples)});
    }
    table.ascending = table.descending;
    std::sort(table.descending.begin(), table.descending.end(), [](const auto& a, const auto& b) {
        return a.p_doc != b.p_doc ? a.p_doc > b.p_doc : a.word < b.word;
    });
    std::sort(table.ascending.begin(), table.ascending.end(), [](const auto& a, const auto& b) {
        return a.p_doc != b.p_doc ? a.p_doc < b.p_doc : a.word < b.word;
    });
    return table;
}

/// Pooled par-token counts, indexed [k][t].
inline std::vector<std::vector<std::uint64_t>> topic_type_counts(const posterior_samples& ps, const corpus& c) {
    check_samples_match(ps, c);
    const auto para_of = flatten_paragraph_of_token(c);
    std::vector<std::vector<std::uint64_t>> joint(ps.params.n_topics,
                                                  std::vector<std::uint64_t>(ps.params.n_types, 0));
    for (const auto& s : ps.samples)
        for (std::size_t i = 0; i < para_of.size(); ++i)
            if (s.switches[i] == switch_value::par) ++joint[s.topics[i]][s.types[para_of[i]]];
    return joint;
}

inline constexpr double pmi_smoothing = 1e-12;

struct pmi_ranking {
    std::vector<std::pair<std::uint32_t, double>> topics; // (topic, PMI), best first
    bool no_par_tokens = false;
};

/// Ranks topics for type t by ln[p(k,t) / (p(k) p(t))], with add-epsilon
/// smoothing on the joint counts. Ties keep ascending topic order.
inline pmi_ranking rank_topics_by_pmi(const std::vector<std::vector<std::uint64_t>>& joint, std::uint32_t t,
                                      std::size_t n) {
    const std::size_t K = joint.size();
    if (K == 0 || t >= joint.front().size()) throw validation_error("type id out of range");
    if (n > K) throw validation_error("requested more topics than exist");
    const std::size_t T = joint.front().size();

    pmi_ranking out;
    std::uint64_t type_total = 0;
    for (std::size_t k = 0; k < K; ++k) type_total += joint[k][t];
    if (type_total == 0) {
        out.no_par_tokens = true;
        return out;
    }

    const double eps = pmi_smoothing;
    double total = 0.0;
    std::vector<double> topic_margin(K, 0.0);
    double type_margin = 0.0;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t u = 0; u < T; ++u) {
            const double v = static_cast<double>(joint[k][u]) + eps;
            total += v;
            topic_margin[k] += v;
            if (u == t) type_margin += v;
        }
    for (std::size_t k = 0; k < K; ++k) {
        const double pkt = (static_cast<double>(joint[k][t]) + eps) / total;
        const double pk = topic_margin[k] / total;
        const double pt = type_margin / total;
        out.topics.emplace_back(static_cast<std::uint32_t>(k), std::log(pkt / (pk * pt)));
    }
    std::stable_sort(out.topics.begin(), out.topics.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    out.topics.resize(n);
    return out;
}

inline pmi_ranking top_topics_by_pmi(const posterior_samples& ps, const corpus& c, std::uint32_t t, std::size_t n) {
    return rank_topics_by_pmi(topic_type_counts(ps, c), t, n);
}

/// Pooled topic-word counts, indexed [k][w].
inline std::vector<std::vector<std::uint64_t>> topic_word_counts(const posterior_samples& ps, const corpus& c) {
    check_samples_match(ps, c);
    const auto words = flatten_words(c);
    std::vector<std::vector<std::uint64_t>> counts(ps.params.n_topics,
                                                   std::vector<std::uint64_t>(c.vocab().size(), 0));
    for (const auto& s : ps.samples)
        for (std::size_t i = 0; i < words.size(); ++i) ++counts[s.topics[i]][words[i]];
    return counts;
}

/// Words with positive count in row, by count descending then lexicographically.
inline std::vector<std::pair<std::string, std::uint64_t>> rank_words(const std::vector<std::uint64_t>& row,
                                                                     const vocabulary& vocab, std::size_t n) {
    std::vector<std::pair<std::string, std::uint64_t>> ranked;
    for (std::size_t w = 0; w < row.size(); ++w)
        if (row[w]) ranked.emplace_back(vocab.word(static_cast<word_id>(w)), row[w]);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > n) ranked.resize(n);
    return ranked;
}

inline std::vector<std::pair<std::string, std::uint64_t>> top_words_per_topic(const posterior_samples& ps,
                                                                              const corpus& c, std::uint32_t k,
                                                                              std::size_t n) {
    if (k >= ps.params.n_topics) throw validation_error("topic id out of range");
    if (n > c.vocab().size()) throw validation_error("requested more words than the vocabulary holds");
    return rank_words(topic_word_counts(ps, c)[k], c.vocab(), n);
}

using pos_lexicon = std::unordered_map<std::string, std::string>;

/// "word TAG" per line.
inline pos_lexicon load_lexicon(const std::filesystem::path& path) {
    pos_lexicon lex;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto parts = split_whitespace(lines[i]);
        if (parts.empty()) continue;
        if (parts.size() != 2) throw parse_error("lexicon line must be 'word TAG'", i + 1);
        lex[to_lower(parts[0])] = parts[1];
    }
    return lex;
}

inline constexpr const char* unknown_pos_tag = "X";

/// Tag proportions; words missing from the lexicon count as X.
inline std::map<std::string, double> pos_distribution(const std::vector<std::string>& words, const pos_lexicon& lex) {
    std::map<std::string, double> hist;
    if (words.empty()) return hist;
    for (const auto& w : words) {
        auto it = lex.find(w);
        hist[it == lex.end() ? unknown_pos_tag : it->second] += 1.0;
    }
    for (auto& [tag, v] : hist) v /= static_cast<double>(words.size());
    return hist;
}

struct analysis_options {
    std::uint64_t min_count = 50;
    std::size_t top_n = 10;
};

struct analysis_report {
    std::uint32_t n_types = 0;
    type_assignments types;
    transition_result transitions;
    std::vector<double> first_distribution;
    double first_entropy = 0.0;
    switch_word_table switch_words;
    std::vector<pmi_ranking> type_topics;                                      // [t]
    std::vector<std::vector<std::pair<std::string, std::uint64_t>>> topic_words; // [k]
    std::map<std::string, double> pos_par; // top_n words most tied to s=par
    std::map<std::string, double> pos_doc; // top_n words most tied to s=doc
};

inline analysis_report analyze(const posterior_samples& ps, const corpus& c, const analysis_options& opt,
                               const pos_lexicon& lex) {
    check_samples_match(ps, c);
    analysis_report r;
    const std::uint32_t T = ps.params.n_types;
    const std::uint32_t K = ps.params.n_topics;
    r.n_types = T;
    r.types = majority_types(ps, c);
    r.transitions = transition_matrix(r.types, T);
    r.first_distribution = first_paragraph_distribution(r.types, T);
    r.first_entropy = first_paragraph_entropy(r.types, T);
    r.switch_words = switch_word_posterior(ps, c, opt.min_count);

    const auto joint = topic_type_counts(ps, c);
    const std::size_t n_topics = std::min<std::size_t>(opt.top_n, K);
    for (std::uint32_t t = 0; t < T; ++t) r.type_topics.push_back(rank_topics_by_pmi(joint, t, n_topics));

    const auto tw = topic_word_counts(ps, c);
    const std::size_t n_words = std::min<std::size_t>(opt.top_n, c.vocab().size());
    for (std::uint32_t k = 0; k < K; ++k) r.topic_words.push_back(rank_words(tw[k], c.vocab(), n_words));

    std::vector<std::string> par_words, doc_words;
    for (std::size_t i = 0; i < r.switch_words.ascending.size() && i < opt.top_n; ++i)
        par_words.push_back(r.switch_words.ascending[i].word);
    for (std::size_t i = 0; i < r.switch_words.descending.size() && i < opt.top_n; ++i)
        doc_words.push_back(r.switch_words.descending[i].word);
    r.pos_par = pos_distribution(par_words, lex);
    r.pos_doc = pos_distribution(doc_words, lex);
    return r;
}

inline std::string transition_csv(const transition_result& tr) {
    const std::size_t T = tr.matrix.size();
    std::vector<std::string> header{"from"};
    for (std::size_t j = 0; j < T; ++j) header.push_back("to_" + std::to_string(j));
    header.push_back("empty_row");
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < T; ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (double v : tr.matrix[i]) row.push_back(format_double(v));
        row.push_back(tr.empty_row[i] ? "1" : "0");
        out += csv_line(row);
    }
    return out;
}

/// Whitespace matrix, one row per from-type, for external plotting.
inline std::string transition_dat(const transition_result& tr) {
    std::string out;
    for (const auto& row : tr.matrix) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ' ';
            out += format_double(row[j]);
        }
        out += '\n';
    }
    return out;
}

inline std::string paragraph_types_csv(const type_assignments& types, const corpus& c, std::string_view column) {
    std::string out = csv_line({"doc_id", "paragraph_index", std::string(column)});
    for (std::size_t d = 0; d < types.size(); ++d)
        for (std::size_t p = 0; p < types[d].size(); ++p)
            out += csv_line({c.documents()[d].id, std::to_string(p), std::to_string(types[d][p])});
    return out;
}

inline std::string entropy_text(double h) { return format_double(h) + "\n"; }

inline std::string first_distribution_csv(const std::vector<double>& q) {
    std::string out = "type,probability\n";
    for (std::size_t t = 0; t < q.size(); ++t) out += std::to_string(t) + "," + format_double(q[t]) + "\n";
    return out;
}

/// Writes the structural files shared by the topic model and the baseline.
inline void write_structure_report(const std::filesystem::path& dir, const type_assignments& types, std::uint32_t t,
                                   const corpus& c, std::string_view column) {
    std::filesystem::create_directories(dir);
    const auto tr = transition_matrix(types, t);
    write_file(dir / "transition_matrix.csv", transition_csv(tr));
    write_file(dir / "transition_matrix.dat", transition_dat(tr));
    write_file(dir / "first_para_entropy.txt", entropy_text(first_paragraph_entropy(types, t)));
    write_file(dir / "first_para_distribution.csv", first_distribution_csv(first_paragraph_distribution(types, t)));
    write_file(dir / "paragraph_types.csv", paragraph_types_csv(types, c, column));
}

inline void write_report(const std::filesystem::path& dir, const analysis_report& r, const corpus& c) {
    write_structure_report(dir, r.types, r.n_types, c, "type");

    std::string sw = "word,count,p_doc\n";
    for (const auto& e : r.switch_words.descending)
        sw += csv_line({e.word, std::to_string(e.count), format_double(e.p_doc)});
    write_file(dir / "switch_words.csv", sw);

    std::string tt = "type,rank,topic,pmi,top_words\n";
    for (std::size_t t = 0; t < r.type_topics.size(); ++t) {
        const auto& rank = r.type_topics[t];
        if (rank.no_par_tokens) {
            tt += csv_line({std::to_string(t), "", "", "", "no paragraph-assigned tokens"});
            continue;
        }
        for (std::size_t i = 0; i < rank.topics.size(); ++i) {
            const auto [k, pmi] = rank.topics[i];
            std::vector<std::string> words;
            for (std::size_t j = 0; j < r.topic_words[k].size() && j < 3; ++j) words.push_back(r.topic_words[k][j].first);
            tt += csv_line({std::to_string(t), std::to_string(i + 1), std::to_string(k), format_double(pmi), join(words, " ")});
        }
    }
    write_file(dir / "type_topics.csv", tt);

    std::string tw = "topic,rank,word,count\n";
    for (std::size_t k = 0; k < r.topic_words.size(); ++k)
        for (std::size_t i = 0; i < r.topic_words[k].size(); ++i)
            tw += csv_line({std::to_string(k), std::to_string(i + 1), r.topic_words[k][i].first,
                            std::to_string(r.topic_words[k][i].second)});
    write_file(dir / "topic_words.csv", tw);

    std::string pos = "group,tag,proportion\n";
    for (const auto& [tag, v] : r.pos_par) pos += csv_line({"s=par", tag, format_double(v)});
    for (const auto& [tag, v] : r.pos_doc) pos += csv_line({"s=doc", tag, format_double(v)});
    write_file(dir / "pos_hist.csv", pos);
}

} // namespace ptm
