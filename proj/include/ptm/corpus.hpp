#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptm/errors.hpp"
#include "ptm/text.hpp"

namespace ptm {

using word_id = std::uint32_t;
using calendar_date = std::chrono::year_month_day;

/// Parses a strict "YYYY-MM-DD" calendar date.
inline std::optional<calendar_date> parse_date(std::string_view s) {
    s = trim(s);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = parse_int(s.substr(0, 4));
    auto m = parse_int(s.substr(5, 2));
    auto d = parse_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    calendar_date date{std::chrono::year{static_cast<int>(*y)},
                       std::chrono::month{static_cast<unsigned>(*m)},
                       std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

inline std::string format_date(const calendar_date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

struct raw_document {
    std::string id;
    std::optional<calendar_date> date;
    std::string headline;
    std::vector<std::string> paragraphs;

    friend bool operator==(const raw_document&, const raw_document&) = default;
};

/// Reads a JSON-lines article collection. Blank lines are skipped.
inline std::vector<raw_document> load_collection(const std::filesystem::path& path) {
    using nlohmann::json;
    const auto lines = read_lines(path);
    std::vector<raw_document> docs;
    std::unordered_set<std::string> seen;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;

        json record;
        try {
            record = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            throw parse_error(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!record.is_object()) throw parse_error("record is not an object", line_no);

        raw_document doc;
        if (!record.contains("id") || !record["id"].is_string())
            throw parse_error("missing string field 'id'", line_no);
        doc.id = record["id"].get<std::string>();

        if (!record.contains("paragraphs") || !record["paragraphs"].is_array())
            throw parse_error("missing array field 'paragraphs'", line_no);
        for (const auto& p : record["paragraphs"]) {
            if (!p.is_string()) throw parse_error("paragraph is not a string", line_no);
            doc.paragraphs.push_back(p.get<std::string>());
        }
        if (doc.paragraphs.empty()) throw parse_error("'paragraphs' is empty", line_no);

        if (record.contains("headline") && !record["headline"].is_null()) {
            if (!record["headline"].is_string()) throw parse_error("'headline' is not a string", line_no);
            doc.headline = record["headline"].get<std::string>();
        }
        if (record.contains("date") && !record["date"].is_null()) {
            if (!record["date"].is_string()) throw parse_error("'date' is not a string", line_no);
            doc.date = parse_date(record["date"].get<std::string>());
            if (!doc.date) throw parse_error("'date' is not YYYY-MM-DD", line_no);
        }

        if (!seen.insert(doc.id).second)
            throw validation_error("duplicate document id '" + doc.id + "' (line " +
                                   std::to_string(line_no) + ")");
        docs.push_back(std::move(doc));
    }
    return docs;
}

/// Keeps documents whose headline or any paragraph contains keyword as a whole token.
inline std::vector<raw_document> filter_keyword(const std::vector<raw_document>& docs,
                                                std::string_view keyword) {
    std::vector<raw_document> kept;
    const auto has_keyword = [&](std::string_view text) {
        const auto tokens = tokenize(text);
        return std::find(tokens.begin(), tokens.end(), keyword) != tokens.end();
    };
    for (const auto& doc : docs) {
        bool match = has_keyword(doc.headline);
        for (std::size_t i = 0; !match && i < doc.paragraphs.size(); ++i)
            match = has_keyword(doc.paragraphs[i]);
        if (match) kept.push_back(doc);
    }
    return kept;
}

inline bool is_weekday(const calendar_date& date) {
    const std::chrono::weekday wd{std::chrono::sys_days{date}};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

/// Keeps Monday-Friday documents. Undated documents are kept.
inline std::vector<raw_document> filter_weekday(const std::vector<raw_document>& docs) {
    std::vector<raw_document> kept;
    for (const auto& doc : docs)
        if (!doc.date || is_weekday(*doc.date)) kept.push_back(doc);
    return kept;
}

inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::set<std::string> words;
    for (const auto& line : read_lines(path)) {
        auto w = trim(line);
        if (!w.empty()) words.insert(to_lower(w));
    }
    return words;
}

/// Dense word <-> id mapping with per-word corpus frequency.
class vocabulary {
  public:
    vocabulary() = default;

    /// Words must be unique; ids follow the given order.
    vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts)
        : words_(std::move(words)), counts_(std::move(counts)) {
        if (words_.size() != counts_.size()) throw validation_error("vocabulary size mismatch");
        index_.reserve(words_.size());
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (!index_.emplace(words_[i], static_cast<word_id>(i)).second)
                throw validation_error("duplicate vocabulary word '" + words_[i] + "'");
    }

    std::size_t size() const { return words_.size(); }
    const std::string& word(word_id id) const { return words_.at(id); }
    std::uint64_t count(word_id id) const { return counts_.at(id); }

    std::optional<word_id> id(std::string_view word) const {
        auto it = index_.find(std::string(word));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

  private:
    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, word_id> index_;
};

using paragraph = std::vector<word_id>;

struct document {
    std::string id;
    std::vector<paragraph> paragraphs;

    friend bool operator==(const document&, const document&) = default;
};

/// Immutable tokenized collection: documents -> paragraphs -> word ids.
class corpus {
  public:
    corpus(std::vector<document> docs, vocabulary vocab)
        : docs_(std::move(docs)), vocab_(std::move(vocab)) {
        if (docs_.empty()) throw validation_error("corpus has no documents");
        if (vocab_.size() == 0) throw validation_error("corpus vocabulary is empty");
        for (const auto& d : docs_) {
            if (d.paragraphs.empty()) throw validation_error("document '" + d.id + "' has no paragraphs");
            for (const auto& p : d.paragraphs)
                for (word_id w : p)
                    if (w >= vocab_.size()) throw validation_error("token id out of range in '" + d.id + "'");
            n_paragraphs_ += d.paragraphs.size();
            for (const auto& p : d.paragraphs) n_tokens_ += p.size();
        }
    }

    const std::vector<document>& documents() const { return docs_; }
    const vocabulary& vocab() const { return vocab_; }
    std::size_t n_documents() const { return docs_.size(); }
    std::size_t n_paragraphs() const { return n_paragraphs_; }
    std::size_t n_tokens() const { return n_tokens_; }

  private:
    std::vector<document> docs_;
    vocabulary vocab_;
    std::size_t n_paragraphs_ = 0;
    std::size_t n_tokens_ = 0;
};

/// Tokenizes, drops stopwords and rare words, and assigns ids by
/// descending frequency with lexicographic tie-break.
inline corpus build_corpus(const std::vector<raw_document>& docs, const std::set<std::string>& stopwords,
                           std::uint64_t min_count) {
    if (min_count < 1) throw validation_error("min_count must be >= 1");

    std::vector<std::vector<std::vector<std::string>>> tokenized;
    tokenized.reserve(docs.size());
    std::map<std::string, std::uint64_t> freq;
    for (const auto& doc : docs) {
        auto& paras = tokenized.emplace_back();
        for (const auto& text : doc.paragraphs) {
            auto& kept = paras.emplace_back();
            for (auto& tok : tokenize(text)) {
                if (stopwords.count(tok)) continue;
                ++freq[tok];
                kept.push_back(std::move(tok));
            }
        }
    }

    std::vector<std::pair<std::string, std::uint64_t>> entries;
    for (const auto& [w, c] : freq)
        if (c >= min_count) entries.emplace_back(w, c);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    std::unordered_map<std::string, word_id> ids;
    for (const auto& [w, c] : entries) {
        ids.emplace(w, static_cast<word_id>(words.size()));
        words.push_back(w);
        counts.push_back(c);
    }

    std::vector<document> out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        document doc{docs[d].id, {}};
        for (const auto& toks : tokenized[d]) {
            paragraph p;
            for (const auto& t : toks) {
                auto it = ids.find(t);
                if (it != ids.end()) p.push_back(it->second);
            }
            if (!p.empty()) doc.paragraphs.push_back(std::move(p));
        }
        if (!doc.paragraphs.empty()) out.push_back(std::move(doc));
    }
    if (out.empty()) throw validation_error("all documents are empty after filtering");
    return corpus(std::move(out), vocabulary(std::move(words), std::move(counts)));
}

inline constexpr int corpus_format_version = 1;

/// Single-line JSON: format tag, version, vocabulary table, then documents.
inline std::string serialize_corpus(const corpus& c) {
    nlohmann::ordered_json j;
    j["format"] = "ptm-corpus";
    j["version"] = corpus_format_version;
    auto vocab = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.vocab().size(); ++i)
        vocab.push_back({c.vocab().words()[i], c.vocab().counts()[i]});
    j["vocabulary"] = std::move(vocab);
    auto docs = nlohmann::ordered_json::array();
    for (const auto& d : c.documents()) {
        nlohmann::ordered_json jd;
        jd["id"] = d.id;
        jd["paragraphs"] = d.paragraphs;
        docs.push_back(std::move(jd));
    }
    j["documents"] = std::move(docs);
    return j.dump() + "\n";
}

inline corpus deserialize_corpus(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(std::string("corpus file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format") != "ptm-corpus") throw parse_error("not a ptm corpus file");
        if (j.at("version").get<int>() != corpus_format_version)
            throw parse_error("unsupported corpus version " + j.at("version").dump());
        std::vector<std::string> words;
        std::vector<std::uint64_t> counts;
        for (const auto& e : j.at("vocabulary")) {
            words.push_back(e.at(0).get<std::string>());
            counts.push_back(e.at(1).get<std::uint64_t>());
        }
        std::vector<document> docs;
        for (const auto& jd : j.at("documents"))
            docs.push_back({jd.at("id").get<std::string>(), jd.at("paragraphs").get<std::vector<paragraph>>()});
        return corpus(std::move(docs), vocabulary(std::move(words), std::move(counts)));
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("malformed corpus file: ") + e.what());
    }
}

inline corpus load_corpus(const std::filesystem::path& path) { return deserialize_corpus(read_file(path)); }

} // namespace ptm
