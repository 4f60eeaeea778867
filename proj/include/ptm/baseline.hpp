#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptm/corpus.hpp"
#include "ptm/errors.hpp"
#include "ptm/rng.hpp"
#include "ptm/text.hpp"

namespace ptm {

using vec = std::vector<double>;

class embedding_table {
  public:
    embedding_table() = default;
    explicit embedding_table(std::size_t dim) : dim_(dim) {
        if (dim < 1) throw validation_error("embedding dimension must be >= 1");
    }

    /// Inserts or replaces; returns true when the word was already present.
    bool set(const std::string& word, vec v) {
        if (v.size() != dim_) throw validation_error("embedding dimension mismatch for '" + word + "'");
        auto [it, inserted] = table_.insert_or_assign(word, std::move(v));
        return !inserted;
    }

    const vec* find(const std::string& word) const {
        auto it = table_.find(word);
        return it == table_.end() ? nullptr : &it->second;
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return table_.size(); }

  private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, vec> table_;
};

struct embedding_load_result {
    embedding_table table;
    std::size_t duplicates = 0; // later entries that replaced earlier ones
};

/// "word v1 v2 ... vdim" per line; blank lines skipped.
inline embedding_load_result load_embeddings(const std::filesystem::path& path) {
    embedding_load_result out;
    std::size_t dim = 0;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto parts = split_whitespace(lines[i]);
        if (parts.empty()) continue;
        if (parts.size() < 2) throw parse_error("embedding line has no values", i + 1);
        vec v;
        v.reserve(parts.size() - 1);
        for (std::size_t j = 1; j < parts.size(); ++j) {
            auto x = parse_double(parts[j]);
            if (!x) throw parse_error("bad number '" + parts[j] + "' in embedding", i + 1);
            v.push_back(*x);
        }
        if (dim == 0) {
            dim = v.size();
            out.table = embedding_table(dim);
        } else if (v.size() != dim) {
            throw parse_error("embedding has dimension " + std::to_string(v.size()) + ", expected " +
                                  std::to_string(dim),
                              i + 1);
        }
        if (out.table.set(parts[0], std::move(v))) ++out.duplicates;
    }
    if (dim == 0) throw parse_error("embedding file has no entries");
    return out;
}

struct paragraph_embedding {
    vec vector;
    bool no_known_words = false;
};

/// Mean embedding over the paragraph's in-table tokens.
inline paragraph_embedding paragraph_vector(const paragraph& tokens, const vocabulary& vocab,
                                            const embedding_table& emb) {
    paragraph_embedding out{vec(emb.dim(), 0.0), false};
    std::size_t hits = 0;
    for (word_id w : tokens) {
        const vec* e = emb.find(vocab.word(w));
        if (!e) continue;
        for (std::size_t j = 0; j < e->size(); ++j) out.vector[j] += (*e)[j];
        ++hits;
    }
    if (hits == 0) {
        out.no_known_words = true;
        return out;
    }
    for (auto& x : out.vector) x /= static_cast<double>(hits);
    return out;
}

struct cluster_result {
    std::vector<std::uint32_t> assignment;
    std::vector<vec> centroids;
    double objective = 0.0;
    std::vector<double> objective_trace; // after each Lloyd step, then the final assignment
    std::uint32_t iterations = 0;
};

inline double squared_distance(const vec& a, const vec& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

namespace detail {

inline std::vector<vec> kmeans_plus_plus(const std::vector<vec>& points, std::uint32_t t, rng& gen) {
    const std::size_t n = points.size();
    std::vector<vec> centroids;
    centroids.push_back(points[gen.below(static_cast<std::uint32_t>(n))]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < t) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick;
        if (total > 0.0)
            pick = gen.categorical(d2, total);
        else
            pick = gen.below(static_cast<std::uint32_t>(n));
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
    return centroids;
}

// Nearest centroid, lowest index on ties. Returns the objective.
inline double assign_points(const std::vector<vec>& points, const std::vector<vec>& centroids,
                            std::vector<std::uint32_t>& assignment, std::vector<double>& dist) {
    double objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::uint32_t c = 0; c < centroids.size(); ++c) {
            const double d = squared_distance(points[i], centroids[c]);
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        assignment[i] = arg;
        dist[i] = best;
        objective += best;
    }
    return objective;
}

} // namespace detail

/// k-means++ seeding followed by Lloyd iterations.
///
/// Stops when an iteration improves the objective by less than tol, when
/// assignments stop changing, or after max_iter iterations. An empty
/// cluster takes the point farthest from its centroid among clusters that
/// have more than one member. The returned assignment is the nearest
/// centroid of each point for the returned centroids.
inline cluster_result kmeans(const std::vector<vec>& points, std::uint32_t t, std::uint64_t seed,
                             std::uint32_t max_iter = 100, double tol = 1e-6) {
    if (t < 1) throw validation_error("cluster count must be >= 1");
    if (t > points.size()) throw validation_error("cluster count exceeds point count");
    if (max_iter < 1) throw validation_error("max_iter must be >= 1");
    if (!(tol >= 0.0)) throw validation_error("tol must be >= 0");
    const std::size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw validation_error("points have inconsistent dimensions");

    const std::size_t n = points.size();
    rng gen(seed);
    cluster_result res;
    res.centroids = detail::kmeans_plus_plus(points, t, gen);
    res.assignment.assign(n, 0);
    std::vector<double> dist(n);
    std::vector<std::uint32_t> previous;

    double prev_objective = std::numeric_limits<double>::infinity();
    for (std::uint32_t iter = 0; iter < max_iter; ++iter) {
        detail::assign_points(points, res.centroids, res.assignment, dist);

        std::vector<std::size_t> sizes(t, 0);
        for (auto a : res.assignment) ++sizes[a];
        for (std::uint32_t c = 0; c < t; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (sizes[res.assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            --sizes[res.assignment[far]];
            res.assignment[far] = c;
            dist[far] = 0.0;
            sizes[c] = 1;
        }

        std::vector<vec> sums(t, vec(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) sums[res.assignment[i]][j] += points[i][j];
        for (std::uint32_t c = 0; c < t; ++c)
            for (std::size_t j = 0; j < dim; ++j) res.centroids[c][j] = sums[c][j] / static_cast<double>(sizes[c]);

        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            objective += squared_distance(points[i], res.centroids[res.assignment[i]]);
        res.objective_trace.push_back(objective);
        ++res.iterations;

        const bool stable = res.assignment == previous;
        previous = res.assignment;
        if (stable || prev_objective - objective < tol) break;
        prev_objective = objective;
    }

    res.objective = detail::assign_points(points, res.centroids, res.assignment, dist);
    res.objective_trace.push_back(res.objective);
    return res;
}

} // namespace ptm
