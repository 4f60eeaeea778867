#pragma once

// Test-only reference computations. Nothing here uses the sampler's count
// tables or its joint_log_prob: the collapsed joint is rebuilt as a chain of
// Polya-urn predictive probabilities over the raw assignments, which is an
// algebraically different route to the same Dirichlet-multinomial value.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <vector>

namespace oracle {

struct toy_model {
    // docs -> paragraphs -> word ids
    std::vector<std::vector<std::vector<std::uint32_t>>> docs;
    std::uint32_t V = 0, K = 0, T = 0;
    double alpha = 0, beta = 0, h_p = 0, h_t = 0, gamma = 0;

    std::size_t n_paragraphs() const {
        std::size_t n = 0;
        for (const auto& d : docs) n += d.size();
        return n;
    }
    std::size_t n_tokens() const {
        std::size_t n = 0;
        for (const auto& d : docs)
            for (const auto& p : d) n += p.size();
        return n;
    }
};

/// Flat assignments in document, paragraph, token order; s: 0 = par, 1 = doc.
struct assignment {
    std::vector<std::uint32_t> types;
    std::vector<std::uint8_t> s;
    std::vector<std::uint32_t> z;
};

/// log p(T, s, z, w) via sequential predictive probabilities.
inline double log_joint(const toy_model& m, const assignment& a) {
    double lp = 0.0;

    // Paragraph types drawn one at a time from the urn with concentration h_t.
    std::map<std::uint32_t, double> type_seen;
    double n_seen = 0;
    for (auto t : a.types) {
        lp += std::log((type_seen[t] + m.h_t) / (n_seen + m.T * m.h_t));
        type_seen[t] += 1;
        n_seen += 1;
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, double> type_topic, doc_topic, topic_word;
    std::map<std::uint32_t, double> type_total, doc_total, topic_total;
    std::size_t g = 0, i = 0;
    for (std::uint32_t d = 0; d < m.docs.size(); ++d) {
        for (const auto& para : m.docs[d]) {
            const auto t = a.types[g++];
            for (auto w : para) {
                const auto k = a.z[i];
                if (a.s[i] == 0) {
                    if (m.gamma <= 0.0) return -std::numeric_limits<double>::infinity();
                    lp += std::log(m.gamma);
                    lp += std::log((type_topic[{t, k}] + m.h_p) / (type_total[t] + m.K * m.h_p));
                    type_topic[{t, k}] += 1;
                    type_total[t] += 1;
                } else {
                    if (m.gamma >= 1.0) return -std::numeric_limits<double>::infinity();
                    lp += std::log(1.0 - m.gamma);
                    lp += std::log((doc_topic[{d, k}] + m.alpha) / (doc_total[d] + m.K * m.alpha));
                    doc_topic[{d, k}] += 1;
                    doc_total[d] += 1;
                }
                lp += std::log((topic_word[{k, w}] + m.beta) / (topic_total[k] + m.V * m.beta));
                topic_word[{k, w}] += 1;
                topic_total[k] += 1;
                ++i;
            }
        }
    }
    return lp;
}

inline std::vector<double> normalize_log(const std::vector<double>& lw) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : lw) mx = std::max(mx, v);
    std::vector<double> p(lw.size());
    double total = 0.0;
    for (std::size_t j = 0; j < lw.size(); ++j) {
        p[j] = std::isfinite(lw[j]) ? std::exp(lw[j] - mx) : 0.0;
        total += p[j];
    }
    for (auto& v : p) v /= total;
    return p;
}

/// Exact conditional of paragraph g's type given everything else.
inline std::vector<double> type_conditional(const toy_model& m, assignment a, std::size_t g) {
    std::vector<double> lw(m.T);
    for (std::uint32_t t = 0; t < m.T; ++t) {
        a.types[g] = t;
        lw[t] = log_joint(m, a);
    }
    return normalize_log(lw);
}

/// Exact conditional of token i's (s, z) block; cell s*K + k.
inline std::vector<double> block_conditional(const toy_model& m, assignment a, std::size_t i) {
    std::vector<double> lw(2 * m.K);
    for (std::uint8_t s = 0; s < 2; ++s)
        for (std::uint32_t k = 0; k < m.K; ++k) {
            a.s[i] = s;
            a.z[i] = k;
            lw[s * m.K + k] = log_joint(m, a);
        }
    return normalize_log(lw);
}

/// Visits every joint assignment with its unnormalized probability.
inline void enumerate(const toy_model& m, const std::function<void(const assignment&, double)>& visit) {
    const std::size_t P = m.n_paragraphs(), N = m.n_tokens();
    assignment a{std::vector<std::uint32_t>(P, 0), std::vector<std::uint8_t>(N, 0), std::vector<std::uint32_t>(N, 0)};
    std::uint64_t n_states = 1;
    for (std::size_t p = 0; p < P; ++p) n_states *= m.T;
    for (std::size_t i = 0; i < N; ++i) n_states *= 2 * m.K;
    for (std::uint64_t code = 0; code < n_states; ++code) {
        std::uint64_t c = code;
        for (std::size_t p = 0; p < P; ++p) {
            a.types[p] = static_cast<std::uint32_t>(c % m.T);
            c /= m.T;
        }
        for (std::size_t i = 0; i < N; ++i) {
            const auto cell = c % (2 * m.K);
            c /= 2 * m.K;
            a.s[i] = static_cast<std::uint8_t>(cell / m.K);
            a.z[i] = static_cast<std::uint32_t>(cell % m.K);
        }
        visit(a, std::exp(log_joint(m, a)));
    }
}

/// Exact single-variable and pairwise marginals from full enumeration.
struct exact_marginals {
    std::vector<std::vector<double>> type;  // [p][t]
    std::vector<std::vector<double>> block; // [i][s*K + k]
    std::vector<std::vector<double>> s;     // [i][s]
    std::vector<std::vector<double>> z;     // [i][k]
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> type_pairs; // [(p,q)][tp*T + tq]
};

inline exact_marginals enumerate_marginals(const toy_model& m) {
    const std::size_t P = m.n_paragraphs(), N = m.n_tokens();
    exact_marginals out;
    out.type.assign(P, std::vector<double>(m.T, 0.0));
    out.block.assign(N, std::vector<double>(2 * m.K, 0.0));
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t q = p + 1; q < P; ++q) out.type_pairs[{p, q}].assign(m.T * m.T, 0.0);
    double total = 0.0;
    enumerate(m, [&](const assignment& a, double w) {
        total += w;
        for (std::size_t p = 0; p < P; ++p) {
            out.type[p][a.types[p]] += w;
            for (std::size_t q = p + 1; q < P; ++q) out.type_pairs[{p, q}][a.types[p] * m.T + a.types[q]] += w;
        }
        for (std::size_t i = 0; i < N; ++i) out.block[i][a.s[i] * m.K + a.z[i]] += w;
    });
    for (auto& row : out.type)
        for (auto& v : row) v /= total;
    for (auto& row : out.block)
        for (auto& v : row) v /= total;
    for (auto& [_, row] : out.type_pairs)
        for (auto& v : row) v /= total;
    out.s.assign(N, std::vector<double>(2, 0.0));
    out.z.assign(N, std::vector<double>(m.K, 0.0));
    for (std::size_t i = 0; i < N; ++i)
        for (std::uint32_t s = 0; s < 2; ++s)
            for (std::uint32_t k = 0; k < m.K; ++k) {
                out.s[i][s] += out.block[i][s * m.K + k];
                out.z[i][k] += out.block[i][s * m.K + k];
            }
    return out;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

} // namespace oracle
