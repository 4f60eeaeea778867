#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptm/corpus.hpp"
#include "ptm/errors.hpp"
#include "ptm/text.hpp"

namespace ptm::lede {

struct crime_report {
    std::string id;
    std::string crime_type;
    std::string location;
    std::vector<std::string> codes;
    std::optional<int> victim_age;
    std::optional<std::string> victim_descent;
    std::optional<std::string> victim_sex;
    std::optional<calendar_date> date;
    std::optional<std::string> damage_value;
};

inline bool is_code(std::string_view s) {
    return s.size() == 4 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct row_error {
    std::size_t line = 0;
    std::string message;
};

struct report_batch {
    std::vector<crime_report> reports;
    std::vector<row_error> errors; // rows that were skipped
};

/// CSV with columns id, crime_type, location, codes (space separated),
/// victim_age, victim_descent, victim_sex, date, damage_value. Invalid rows
/// are skipped and reported; empty optional fields are absent.
inline report_batch parse_reports_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw parse_error("report file has no header row", 1);
    const csv_header header(rows.front());
    const auto c_id = header.require("id");
    const auto c_type = header.require("crime_type");
    const auto c_loc = header.require("location");
    const auto c_codes = header.require("codes");
    const auto c_age = header.find("victim_age");
    const auto c_descent = header.find("victim_descent");
    const auto c_sex = header.find("victim_sex");
    const auto c_date = header.find("date");
    const auto c_damage = header.find("damage_value");

    const auto optional_field = [](const csv_row& row, std::optional<std::size_t> col) -> std::optional<std::string> {
        if (!col) return std::nullopt;
        auto v = trim(field_or_empty(row, *col));
        if (v.empty()) return std::nullopt;
        return std::string(v);
    };

    report_batch batch;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        crime_report rep;
        rep.id = std::string(trim(field_or_empty(row, c_id)));
        rep.crime_type = std::string(trim(field_or_empty(row, c_type)));
        rep.location = std::string(trim(field_or_empty(row, c_loc)));
        rep.codes = split_whitespace(field_or_empty(row, c_codes));

        std::string problem;
        if (rep.crime_type.empty()) problem = "empty crime_type";
        for (const auto& code : rep.codes)
            if (problem.empty() && !is_code(code)) problem = "malformed code '" + code + "'";
        if (auto age = optional_field(row, c_age); problem.empty() && age) {
            auto v = parse_int(*age);
            if (!v || *v < 0 || *v > 150) problem = "bad victim_age '" + *age + "'";
            else rep.victim_age = static_cast<int>(*v);
        }
        if (auto d = optional_field(row, c_date); problem.empty() && d) {
            rep.date = parse_date(*d);
            if (!rep.date) problem = "bad date '" + *d + "'";
        }
        if (!problem.empty()) {
            batch.errors.push_back({row.line, (rep.id.empty() ? std::string() : "report " + rep.id + ": ") + problem});
            continue;
        }
        rep.victim_descent = optional_field(row, c_descent);
        rep.victim_sex = optional_field(row, c_sex);
        rep.damage_value = optional_field(row, c_damage);
        batch.reports.push_back(std::move(rep));
    }
    return batch;
}

inline report_batch parse_reports(const std::filesystem::path& path) { return parse_reports_csv(read_file(path)); }

struct code_info {
    std::string description;
    std::string category;
};

using code_table = std::map<std::string, code_info>;

/// CSV with columns code, description, category.
inline code_table parse_code_table_csv(std::string_view text) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw parse_error("code table has no header row", 1);
    const csv_header header(rows.front());
    const auto c_code = header.require("code");
    const auto c_desc = header.require("description");
    const auto c_cat = header.find("category");
    code_table table;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto code = std::string(trim(field_or_empty(rows[r], c_code)));
        if (!is_code(code)) throw parse_error("malformed code '" + code + "'", rows[r].line);
        code_info info{std::string(trim(field_or_empty(rows[r], c_desc))),
                       c_cat ? std::string(trim(field_or_empty(rows[r], *c_cat))) : std::string()};
        if (!table.emplace(code, std::move(info)).second)
            throw validation_error("duplicate code " + code + " in code table (line " + std::to_string(rows[r].line) + ")");
    }
    return table;
}

inline code_table load_code_table(const std::filesystem::path& path) { return parse_code_table_csv(read_file(path)); }

inline constexpr std::string_view hate_crime_code = "0903";

inline const std::array<std::string_view, 6> cluster_names{"suspect behavior", "suspect details", "victim details",
                                                          "bias", "action", "other"};
inline constexpr std::string_view other_cluster = "other";

struct code_cluster {
    std::string name;
    std::vector<std::string> keywords;
};

/// Ordered clusters; matching is first-match in this order.
struct cluster_config {
    std::vector<code_cluster> clusters;

    void validate() const {
        std::set<std::string> seen;
        for (const auto& c : clusters) {
            if (std::find(cluster_names.begin(), cluster_names.end(), c.name) == cluster_names.end())
                throw validation_error("unknown code cluster '" + c.name + "'");
            if (!seen.insert(c.name).second) throw validation_error("duplicate code cluster '" + c.name + "'");
            for (const auto& k : c.keywords)
                if (k != to_lower(k) || k.empty())
                    throw validation_error("cluster keyword '" + k + "' must be non-empty lowercase");
        }
    }
};

struct code_entry {
    std::string code;
    std::string description;

    friend bool operator==(const code_entry&, const code_entry&) = default;
};

struct clustered_codes {
    std::map<std::string, std::vector<code_entry>> clusters; // keyed by cluster name
    std::vector<std::string> warnings;

    const std::vector<code_entry>& operator[](std::string_view name) const {
        static const std::vector<code_entry> none;
        auto it = clusters.find(std::string(name));
        return it == clusters.end() ? none : it->second;
    }
};

inline clustered_codes cluster_codes(const crime_report& report, const code_table& table, const cluster_config& config) {
    clustered_codes out;
    for (const auto& code : report.codes) {
        auto it = table.find(code);
        if (it == table.end()) {
            out.clusters[std::string(other_cluster)].push_back({code, ""});
            out.warnings.push_back("unknown code " + code);
            continue;
        }
        const auto desc = to_lower(it->second.description);
        const auto cat = to_lower(it->second.category);
        std::string target(other_cluster);
        for (const auto& cluster : config.clusters) {
            const bool hit = std::any_of(cluster.keywords.begin(), cluster.keywords.end(), [&](const std::string& k) {
                return desc.find(k) != std::string::npos || cat.find(k) != std::string::npos;
            });
            if (hit) {
                target = cluster.name;
                break;
            }
        }
        out.clusters[target].push_back({code, it->second.description});
    }
    return out;
}

enum class slot {
    suspect_description,
    crime_type_verb,
    victim_description,
    location_indicator,
    location_description,
    other_details,
    damage_value_bracket,
};

inline constexpr std::array<std::pair<slot, std::string_view>, 7> slot_names{{
    {slot::suspect_description, "suspect description"},
    {slot::crime_type_verb, "crime type verb"},
    {slot::victim_description, "victim description"},
    {slot::location_indicator, "location indicator"},
    {slot::location_description, "location description"},
    {slot::other_details, "other details"},
    {slot::damage_value_bracket, "damage-value bracket"},
}};

inline std::string_view slot_name(slot s) {
    for (const auto& [v, n] : slot_names)
        if (v == s) return n;
    return "";
}

inline std::optional<slot> slot_from_name(std::string_view name) {
    for (const auto& [v, n] : slot_names)
        if (n == name) return v;
    return std::nullopt;
}

/// Template text split into literal runs and <slot-name> markers.
class lede_template {
  public:
    struct segment {
        bool is_slot = false;
        std::string literal;
        slot which{};
    };

    lede_template() = default;

    explicit lede_template(std::string text) : text_(std::move(text)) {
        std::size_t pos = 0;
        while (pos < text_.size()) {
            const auto open = text_.find('<', pos);
            if (open == std::string::npos) {
                segments_.push_back({false, text_.substr(pos), {}});
                break;
            }
            if (open > pos) segments_.push_back({false, text_.substr(pos, open - pos), {}});
            const auto close = text_.find('>', open);
            if (close == std::string::npos) throw validation_error("unterminated slot marker in template: " + text_);
            const auto name = text_.substr(open + 1, close - open - 1);
            const auto s = slot_from_name(name);
            if (!s) throw validation_error("unknown slot <" + name + "> in template");
            segments_.push_back({true, {}, *s});
            pos = close + 1;
        }
        for (const auto& seg : segments_)
            if (!seg.is_slot && seg.literal.find('>') != std::string::npos)
                throw validation_error("stray '>' in template: " + text_);
    }

    const std::string& text() const { return text_; }
    const std::vector<segment>& segments() const { return segments_; }

    bool uses(slot s) const {
        return std::any_of(segments_.begin(), segments_.end(),
                           [s](const segment& seg) { return seg.is_slot && seg.which == s; });
    }

  private:
    std::string text_;
    std::vector<segment> segments_;
};

/// Everything hand-authored that drives generation; loaded from one JSON file.
struct lede_resources {
    std::map<std::string, lede_template> templates;                  // crime_type -> template
    std::map<std::string, std::string> verbs;                        // crime_type -> verb
    cluster_config clusters;
    std::map<std::pair<std::string, std::string>, std::string> fallback_spans; // (crime_type, slot name)
    std::map<std::string, std::string> code_phrases;                 // code -> rendered phrase
    std::map<std::string, std::string> descent_names;
    std::map<std::string, std::string> sex_names;
    std::vector<std::string> disability_keywords{"handicap", "disab"};
    std::string disability_marker = "disabled";
};

inline constexpr int lede_config_version = 1;

inline lede_resources parse_lede_config(std::string_view text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(std::string("lede config is not valid JSON: ") + e.what());
    }
    lede_resources res;
    try {
        if (j.value("format", "") != "ptm-lede-config") throw parse_error("not a ptm lede config");
        if (j.at("version").get<int>() != lede_config_version)
            throw parse_error("unsupported lede config version " + j.at("version").dump());
        for (const auto& [type, text] : j.at("templates").items())
            res.templates.emplace(type, lede_template(text.get<std::string>()));
        if (j.contains("verbs")) res.verbs = j["verbs"].get<std::map<std::string, std::string>>();
        for (const auto& c : j.at("clusters"))
            res.clusters.clusters.push_back({c.at("name").get<std::string>(),
                                             c.value("keywords", std::vector<std::string>{})});
        res.clusters.validate();
        if (j.contains("fallback_spans"))
            for (const auto& f : j["fallback_spans"]) {
                const auto name = f.at("slot").get<std::string>();
                if (!slot_from_name(name)) throw validation_error("unknown slot '" + name + "' in fallback_spans");
                res.fallback_spans[{f.at("crime_type").get<std::string>(), name}] = f.at("text").get<std::string>();
            }
        if (j.contains("code_phrases")) res.code_phrases = j["code_phrases"].get<std::map<std::string, std::string>>();
        if (j.contains("descent_names")) res.descent_names = j["descent_names"].get<std::map<std::string, std::string>>();
        if (j.contains("sex_names")) res.sex_names = j["sex_names"].get<std::map<std::string, std::string>>();
        if (j.contains("disability_keywords"))
            res.disability_keywords = j["disability_keywords"].get<std::vector<std::string>>();
        if (j.contains("disability_marker")) res.disability_marker = j["disability_marker"].get<std::string>();
    } catch (const json::exception& e) {
        throw parse_error(std::string("malformed lede config: ") + e.what());
    }
    return res;
}

inline lede_resources load_lede_config(const std::filesystem::path& path) { return parse_lede_config(read_file(path)); }

struct lede_result {
    std::string report_id;
    std::string crime_type;
    std::string text;
    std::map<std::string, std::string> filled; // slot name -> value (may be empty when elided)
    std::vector<std::string> unfilled;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string code_phrase(const code_entry& e, const lede_resources& res) {
    if (auto it = res.code_phrases.find(e.code); it != res.code_phrases.end()) return it->second;
    std::string_view d = e.description;
    if (auto colon = d.rfind(": "); colon != std::string_view::npos) d = d.substr(colon + 2);
    return to_lower(trim(d));
}

inline std::string phrases(const std::vector<code_entry>& entries, const lede_resources& res) {
    std::vector<std::string> parts;
    for (const auto& e : entries) parts.push_back(code_phrase(e, res));
    return join(parts, " and ");
}

inline std::string mapped_name(const std::map<std::string, std::string>& names, const std::string& value) {
    if (auto it = names.find(value); it != names.end()) return it->second;
    return to_lower(value);
}

inline std::string victim_phrase(const crime_report& r, const clustered_codes& clustered, const lede_resources& res) {
    std::vector<std::string> parts{"the"};
    if (r.victim_age) parts.push_back(std::to_string(*r.victim_age) + "-year-old");
    if (r.victim_descent) parts.push_back(mapped_name(res.descent_names, *r.victim_descent));
    const bool disabled = std::any_of(clustered["victim details"].begin(), clustered["victim details"].end(),
                                      [&](const code_entry& e) {
                                          const auto d = to_lower(e.description);
                                          return std::any_of(res.disability_keywords.begin(), res.disability_keywords.end(),
                                                             [&](const std::string& k) { return d.find(k) != std::string::npos; });
                                      });
    if (disabled && !res.disability_marker.empty()) parts.push_back(res.disability_marker);
    if (r.victim_sex) parts.push_back(mapped_name(res.sex_names, *r.victim_sex));
    parts.push_back("victim");
    return join(parts, " ");
}

// True when literal ends in a comma that is attached to literal words
// ("The suspect, "), as opposed to a bare ", " that closes the preceding slot.
inline bool ends_with_introducing_comma(std::string_view literal) {
    literal = trim(literal);
    if (literal.empty() || literal.back() != ',') return false;
    literal.remove_suffix(1);
    return !trim(literal).empty();
}

/// Collapses whitespace, removes spaces before punctuation, and drops a
/// comma that directly precedes sentence-final punctuation.
inline std::string tidy(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
            continue;
        }
        if (c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?') {
            while (!out.empty() && out.back() == ' ') out.pop_back();
            if (c != ',' && !out.empty() && out.back() == ',') out.pop_back();
            if (c == ',' && !out.empty() && out.back() == ',') continue;
        }
        out.push_back(c);
    }
    return std::string(trim(out));
}

} // namespace detail

/// Fills the report's crime-type template.
///
/// Slot sources: verb lookup by crime type; victim description from age,
/// descent, disability codes and sex; the location string, split at its
/// first ", " into indicator and description when the template uses both
/// location slots; suspect details and suspect behavior code clusters;
/// the damage bracket. A slot without a source takes the configured
/// fallback span for (crime type, slot). Cluster-derived slots with no codes
/// and no fallback are elided; other slots stay unfilled with their marker.
inline lede_result fill_slots(const crime_report& report, const lede_resources& res, const code_table& table) {
    auto tit = res.templates.find(report.crime_type);
    if (tit == res.templates.end()) throw validation_error("no template for crime type '" + report.crime_type + "'");
    const lede_template& tpl = tit->second;

    lede_result out;
    out.report_id = report.id;
    out.crime_type = report.crime_type;
    const auto clustered = cluster_codes(report, table, res.clusters);
    out.warnings = clustered.warnings;

    std::optional<std::string> location_indicator, location_description;
    if (!report.location.empty()) {
        const bool both = tpl.uses(slot::location_indicator) && tpl.uses(slot::location_description);
        if (both) {
            const auto cut = report.location.find(", ");
            if (cut == std::string::npos) {
                location_indicator = report.location;
                location_description = "";
            } else {
                location_indicator = report.location.substr(0, cut);
                location_description = report.location.substr(cut + 2);
            }
        } else {
            location_indicator = report.location;
            location_description = report.location;
        }
    }

    const auto fallback = [&](slot s) -> std::optional<std::string> {
        auto it = res.fallback_spans.find({report.crime_type, std::string(slot_name(s))});
        if (it == res.fallback_spans.end()) return std::nullopt;
        return it->second;
    };

    // nullopt: unfilled. Empty string: filled but elided.
    const auto value_of = [&](slot s) -> std::optional<std::string> {
        switch (s) {
        case slot::crime_type_verb:
            if (auto it = res.verbs.find(report.crime_type); it != res.verbs.end()) return it->second;
            return fallback(s);
        case slot::victim_description:
            return detail::victim_phrase(report, clustered, res);
        case slot::location_indicator:
            return location_indicator ? location_indicator : fallback(s);
        case slot::location_description:
            return location_description ? location_description : fallback(s);
        case slot::suspect_description:
        case slot::other_details: {
            const auto& entries = clustered[s == slot::suspect_description ? "suspect details" : "suspect behavior"];
            if (!entries.empty()) return detail::phrases(entries, res);
            return fallback(s).value_or("");
        }
        case slot::damage_value_bracket:
            return report.damage_value ? report.damage_value : fallback(s);
        }
        return std::nullopt;
    };

    std::string raw;
    const auto& segs = tpl.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& seg = segs[i];
        if (!seg.is_slot) {
            raw += seg.literal;
            continue;
        }
        const auto name = std::string(slot_name(seg.which));
        const auto value = value_of(seg.which);
        if (!value) {
            if (std::find(out.unfilled.begin(), out.unfilled.end(), name) == out.unfilled.end())
                out.unfilled.push_back(name);
            raw += "<" + name + ">";
            continue;
        }
        out.filled[name] = *value;
        if (value->empty() && i > 0 && !segs[i - 1].is_slot && detail::ends_with_introducing_comma(segs[i - 1].literal)) {
            while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) raw.pop_back();
            raw.pop_back(); // the comma
        }
        raw += *value;
    }
    out.text = detail::tidy(raw);
    return out;
}

inline nlohmann::ordered_json to_json(const lede_result& r) {
    nlohmann::ordered_json j;
    j["id"] = r.report_id;
    j["crime_type"] = r.crime_type;
    j["text"] = r.text;
    j["filled"] = r.filled;
    j["unfilled"] = r.unfilled;
    j["warnings"] = r.warnings;
    return j;
}

/// Longest contiguous token run shared by every lede; earliest in the first on ties.
inline std::string longest_common_span(const std::vector<std::string>& ledes) {
    if (ledes.size() < 2) throw validation_error("longest_common_span needs at least two ledes");
    std::vector<std::vector<std::string>> toks;
    for (const auto& l : ledes) toks.push_back(tokenize(l));
    const auto& first = toks.front();

    const auto contains = [](const std::vector<std::string>& hay, auto begin, auto end) {
        return std::search(hay.begin(), hay.end(), begin, end) != hay.end();
    };
    for (std::size_t len = first.size(); len > 0; --len) {
        for (std::size_t start = 0; start + len <= first.size(); ++start) {
            const auto b = first.begin() + static_cast<std::ptrdiff_t>(start);
            const auto e = b + static_cast<std::ptrdiff_t>(len);
            bool everywhere = true;
            for (std::size_t j = 1; j < toks.size() && everywhere; ++j) everywhere = contains(toks[j], b, e);
            if (everywhere) return join(std::vector<std::string>(b, e), " ");
        }
    }
    return "";
}

inline std::set<std::vector<std::string>> ngram_set(const std::vector<std::string>& tokens, std::size_t n) {
    std::set<std::vector<std::string>> out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        out.emplace(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    return out;
}

/// |ngrams(generated) ∩ ngrams(truth)| / |ngrams(truth)| with set semantics.
inline double ngram_overlap(std::string_view generated, std::string_view truth, std::size_t n) {
    if (n < 1) throw validation_error("n-gram order must be >= 1");
    const auto truth_set = ngram_set(tokenize(truth), n);
    if (truth_set.empty()) throw validation_error("reference is too short for " + std::to_string(n) + "-grams");
    const auto gen_set = ngram_set(tokenize(generated), n);
    std::size_t shared = 0;
    for (const auto& g : truth_set) shared += gen_set.count(g);
    return static_cast<double>(shared) / static_cast<double>(truth_set.size());
}

struct eval_pair {
    std::string crime_type;
    std::string generated;
    std::string truth;
};

struct type_score {
    std::string crime_type;
    std::size_t n_pairs = 0;
    double mean_accuracy = 0.0;
};

struct evaluation {
    std::vector<type_score> per_type; // sorted by crime type
    double overall = 0.0;             // unweighted mean of per-type means
};

inline evaluation evaluate_corpus(const std::vector<eval_pair>& pairs, std::size_t n) {
    if (pairs.empty()) throw validation_error("no pairs to evaluate");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double score;
        try {
            score = ngram_overlap(pairs[i].generated, pairs[i].truth, n);
        } catch (const validation_error& e) {
            throw validation_error("pair " + std::to_string(i) + ": " + e.what());
        }
        auto& [sum, count] = acc[pairs[i].crime_type];
        sum += score;
        ++count;
    }
    evaluation ev;
    for (const auto& [type, sc] : acc) {
        ev.per_type.push_back({type, sc.second, sc.first / static_cast<double>(sc.second)});
        ev.overall += ev.per_type.back().mean_accuracy;
    }
    ev.overall /= static_cast<double>(ev.per_type.size());
    return ev;
}

inline std::string evaluation_csv(const evaluation& ev) {
    std::string out = "crime_type,n,mean_acc\n";
    std::size_t total = 0;
    for (const auto& t : ev.per_type) {
        out += csv_line({t.crime_type, std::to_string(t.n_pairs), format_double(t.mean_accuracy)});
        total += t.n_pairs;
    }
    out += csv_line({"OVERALL", std::to_string(total), format_double(ev.overall)});
    return out;
}

} // namespace ptm::lede
