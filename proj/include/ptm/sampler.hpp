#pragma once

/*
 * Collapsed Gibbs sampler for the paragraph topic model.
 *
 * Generative story:
 *   theta_t ~ Dir(h_p)            per paragraph type t, over K topics
 *   phi_k   ~ Dir(beta)           per topic k, over V words
 *   P_T     ~ Dir(h_t)            over T paragraph types
 *   per document d:
 *     theta_d ~ Dir(alpha)
 *     per paragraph p:  T_p ~ Cat(P_T)
 *       per token n:    s ~ Bernoulli(gamma)     (par with prob gamma)
 *                       z ~ Cat(theta_{T_p}) if s = par, Cat(theta_d) if s = doc
 *                       w ~ Cat(phi_z)
 *
 * All Dirichlet parameters are integrated out; the state is the discrete
 * assignments (T, s, z) plus count tables kept in sync with them.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ptm/corpus.hpp"
#include "ptm/errors.hpp"
#include "ptm/rng.hpp"

namespace ptm {

enum class switch_value : std::uint8_t { par = 0, doc = 1 };

/// How the paragraph-type conditional treats repeated topics in a paragraph.
enum class type_kernel : std::uint32_t {
    /// Rising-factorial (Polya urn) product: the exact collapsed conditional.
    exact = 0,
    /// Counts held fixed across the token product.
    static_counts = 1,
};

struct hyper_params {
    double alpha = 0.1;
    double beta = 0.1;
    double h_p = 0.1;
    double h_t = 1.0;
    double gamma = 0.7;
    std::uint32_t n_topics = 20;
    std::uint32_t n_types = 10;
    std::uint32_t n_sweeps = 500;
    std::uint32_t burn_in = 250;
    std::uint32_t sample_lag = 25;
    std::uint64_t seed = 0;
    type_kernel kernel = type_kernel::exact;

    void validate() const {
        const auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw validation_error(std::string(name) + " must be > 0");
        };
        positive(alpha, "alpha");
        positive(beta, "beta");
        positive(h_p, "h_p");
        positive(h_t, "h_t");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw validation_error("gamma must be in [0, 1]");
        if (n_topics < 1) throw validation_error("n_topics must be >= 1");
        if (n_types < 1) throw validation_error("n_types must be >= 1");
        if (n_sweeps < 1) throw validation_error("n_sweeps must be >= 1");
        if (burn_in >= n_sweeps) throw validation_error("burn_in must be < n_sweeps");
        if (sample_lag < 1) throw validation_error("sample_lag must be >= 1");
    }
};

/// Sum over one Dirichlet-multinomial block: log p(sequence | symmetric a).
/// counts must sum to total.
inline double log_dirichlet_multinomial(std::span<const std::uint32_t> counts, std::uint64_t total,
                                        double a) {
    const double dim_a = static_cast<double>(counts.size()) * a;
    double acc = std::lgamma(dim_a) - std::lgamma(static_cast<double>(total) + dim_a);
    const double lg_a = std::lgamma(a);
    for (std::uint32_t c : counts)
        if (c) acc += std::lgamma(static_cast<double>(c) + a) - lg_a;
    return acc;
}

/// Cached count tables; compared wholesale by verify().
struct count_tables {
    std::vector<std::uint32_t> type;         // [t]
    std::vector<std::uint32_t> ptopic;       // [t * K + k]
    std::vector<std::uint32_t> ptopic_sum;   // [t]
    std::vector<std::uint32_t> dtopic;       // [d * K + k]
    std::vector<std::uint32_t> dtopic_sum;   // [d]
    std::vector<std::uint32_t> wordtopic;    // [w * K + k]
    std::vector<std::uint32_t> wordtopic_sum; // [k]

    friend bool operator==(const count_tables&, const count_tables&) = default;
};

class sampler_state {
  public:
    /// Random initialization: T_p uniform, s ~ Bernoulli(gamma), z uniform.
    sampler_state(const corpus& c, const hyper_params& hp)
        : hp_(hp), K_(hp.n_topics), T_(hp.n_types), V_(static_cast<std::uint32_t>(c.vocab().size())),
          D_(static_cast<std::uint32_t>(c.n_documents())), rng_(hp.seed) {
        hp_.validate();
        if (V_ < 1) throw validation_error("vocabulary is empty");

        doc_para_begin_.reserve(D_ + 1);
        para_begin_.reserve(c.n_paragraphs() + 1);
        word_.reserve(c.n_tokens());
        doc_para_begin_.push_back(0);
        para_begin_.push_back(0);
        for (std::uint32_t d = 0; d < D_; ++d) {
            for (const auto& p : c.documents()[d].paragraphs) {
                word_.insert(word_.end(), p.begin(), p.end());
                para_doc_.push_back(d);
                para_begin_.push_back(word_.size());
            }
            doc_para_begin_.push_back(para_doc_.size());
        }

        type_.resize(para_doc_.size());
        switch_.resize(word_.size());
        topic_.resize(word_.size());
        for (std::size_t p = 0; p < para_doc_.size(); ++p) {
            type_[p] = rng_.below(T_);
            for (std::size_t i = para_begin_[p]; i < para_begin_[p + 1]; ++i) {
                switch_[i] = rng_.bernoulli(hp_.gamma) ? switch_value::par : switch_value::doc;
                topic_[i] = rng_.below(K_);
            }
        }
        counts_ = tally();
        scratch_.resize(2 * static_cast<std::size_t>(K_));
        log_scratch_.resize(T_);
        hist_.assign(K_, 0);
    }

    const hyper_params& params() const { return hp_; }
    std::uint32_t n_topics() const { return K_; }
    std::uint32_t n_types() const { return T_; }
    std::uint32_t vocab_size() const { return V_; }
    std::uint32_t n_documents() const { return D_; }
    std::size_t n_paragraphs() const { return para_doc_.size(); }
    std::size_t n_tokens() const { return word_.size(); }

    std::size_t paragraph_index(std::size_t d, std::size_t p) const {
        const std::size_t g = doc_para_begin_.at(d) + p;
        if (g >= doc_para_begin_.at(d + 1)) throw std::out_of_range("paragraph index");
        return g;
    }
    std::size_t token_index(std::size_t d, std::size_t p, std::size_t n) const {
        const std::size_t g = paragraph_index(d, p);
        const std::size_t i = para_begin_[g] + n;
        if (i >= para_begin_[g + 1]) throw std::out_of_range("token index");
        return i;
    }
    std::pair<std::size_t, std::size_t> paragraph_tokens(std::size_t g) const {
        return {para_begin_.at(g), para_begin_.at(g + 1)};
    }
    std::uint32_t paragraph_document(std::size_t g) const { return para_doc_.at(g); }
    std::size_t document_paragraph_begin(std::size_t d) const { return doc_para_begin_.at(d); }
    word_id word(std::size_t i) const { return word_[i]; }

    const std::vector<std::uint32_t>& types() const { return type_; }
    const std::vector<switch_value>& switches() const { return switch_; }
    const std::vector<std::uint32_t>& topics() const { return topic_; }
    const count_tables& counts() const { return counts_; }
    const rng& generator() const { return rng_; }

    std::uint32_t c_type(std::uint32_t t) const { return counts_.type[t]; }
    std::uint32_t c_ptopic(std::uint32_t k, std::uint32_t t) const { return counts_.ptopic[t * K_ + k]; }
    std::uint32_t c_dtopic(std::uint32_t k, std::uint32_t d) const {
        return counts_.dtopic[static_cast<std::size_t>(d) * K_ + k];
    }
    std::uint32_t c_wordtopic(std::uint32_t k, word_id w) const {
        return counts_.wordtopic[static_cast<std::size_t>(w) * K_ + k];
    }

    /// Replaces every assignment and rebuilds the count tables.
    void assign(std::vector<std::uint32_t> types, std::vector<switch_value> switches,
                std::vector<std::uint32_t> topics) {
        if (types.size() != type_.size() || switches.size() != switch_.size() || topics.size() != topic_.size())
            throw validation_error("assignment sizes do not match the corpus");
        for (auto t : types)
            if (t >= T_) throw validation_error("paragraph type out of range");
        for (auto k : topics)
            if (k >= K_) throw validation_error("topic out of range");
        type_ = std::move(types);
        switch_ = std::move(switches);
        topic_ = std::move(topics);
        counts_ = tally();
    }

    /// Count tables recomputed from the raw assignments.
    count_tables tally() const {
        count_tables c;
        c.type.assign(T_, 0);
        c.ptopic.assign(static_cast<std::size_t>(T_) * K_, 0);
        c.ptopic_sum.assign(T_, 0);
        c.dtopic.assign(static_cast<std::size_t>(D_) * K_, 0);
        c.dtopic_sum.assign(D_, 0);
        c.wordtopic.assign(static_cast<std::size_t>(V_) * K_, 0);
        c.wordtopic_sum.assign(K_, 0);
        for (std::size_t p = 0; p < type_.size(); ++p) {
            const std::uint32_t t = type_[p];
            const std::uint32_t d = para_doc_[p];
            ++c.type[t];
            for (std::size_t i = para_begin_[p]; i < para_begin_[p + 1]; ++i) {
                const std::uint32_t k = topic_[i];
                if (switch_[i] == switch_value::par) {
                    ++c.ptopic[t * K_ + k];
                    ++c.ptopic_sum[t];
                } else {
                    ++c.dtopic[static_cast<std::size_t>(d) * K_ + k];
                    ++c.dtopic_sum[d];
                }
                ++c.wordtopic[static_cast<std::size_t>(word_[i]) * K_ + k];
                ++c.wordtopic_sum[k];
            }
        }
        return c;
    }

    bool verify() const { return tally() == counts_; }

    /// Normalized conditional over types for paragraph g, state unchanged.
    std::vector<double> paragraph_type_probabilities(std::size_t g) {
        remove_paragraph(g);
        const double total = paragraph_type_weights(g);
        add_paragraph(g);
        std::vector<double> probs(log_scratch_.begin(), log_scratch_.end());
        for (auto& v : probs) v /= total;
        return probs;
    }

    std::uint32_t sample_paragraph_type(std::size_t g) {
        remove_paragraph(g);
        const double total = paragraph_type_weights(g);
        type_[g] = static_cast<std::uint32_t>(rng_.categorical(log_scratch_, total));
        add_paragraph(g);
        return type_[g];
    }

    std::uint32_t sample_paragraph_type(std::size_t d, std::size_t p) {
        return sample_paragraph_type(paragraph_index(d, p));
    }

    /// Normalized 2K block conditional for token i; cell s*K + k.
    std::vector<double> token_block_probabilities(std::size_t i) {
        const std::size_t g = paragraph_of(i);
        remove_token(i, g);
        const double total = token_block_weights(i, g);
        add_token(i, g);
        std::vector<double> probs(scratch_.begin(), scratch_.end());
        for (auto& v : probs) v /= total;
        return probs;
    }

    std::pair<switch_value, std::uint32_t> sample_token_block(std::size_t i) {
        return sample_token_block(i, paragraph_of(i));
    }

    std::pair<switch_value, std::uint32_t> sample_token_block(std::size_t d, std::size_t p, std::size_t n) {
        return sample_token_block(token_index(d, p, n), paragraph_index(d, p));
    }

    /// One pass: each paragraph's type, then each of its tokens, in corpus order.
    void sweep() {
        for (std::size_t g = 0; g < type_.size(); ++g) {
            sample_paragraph_type(g);
            for (std::size_t i = para_begin_[g]; i < para_begin_[g + 1]; ++i) sample_token_block(i, g);
        }
    }

  private:
    std::size_t paragraph_of(std::size_t i) const {
        auto it = std::upper_bound(para_begin_.begin(), para_begin_.end(), i);
        return static_cast<std::size_t>(it - para_begin_.begin()) - 1;
    }

    void remove_paragraph(std::size_t g) {
        const std::uint32_t t = type_[g];
        --counts_.type[t];
        for (std::size_t i = para_begin_[g]; i < para_begin_[g + 1]; ++i) {
            if (switch_[i] != switch_value::par) continue;
            --counts_.ptopic[t * K_ + topic_[i]];
            --counts_.ptopic_sum[t];
        }
    }

    void add_paragraph(std::size_t g) {
        const std::uint32_t t = type_[g];
        ++counts_.type[t];
        for (std::size_t i = para_begin_[g]; i < para_begin_[g + 1]; ++i) {
            if (switch_[i] != switch_value::par) continue;
            ++counts_.ptopic[t * K_ + topic_[i]];
            ++counts_.ptopic_sum[t];
        }
    }

    // Fills log_scratch_ with unnormalized weights (linear scale after
    // max-subtraction) for paragraph g held out; returns their sum.
    double paragraph_type_weights(std::size_t g) {
        std::uint32_t n_par = 0;
        active_.clear();
        for (std::size_t i = para_begin_[g]; i < para_begin_[g + 1]; ++i) {
            if (switch_[i] != switch_value::par) continue;
            if (hist_[topic_[i]]++ == 0) active_.push_back(topic_[i]);
            ++n_par;
        }
        std::sort(active_.begin(), active_.end());

        const double k_hp = static_cast<double>(K_) * hp_.h_p;
        double max_log = -std::numeric_limits<double>::infinity();
        for (std::uint32_t t = 0; t < T_; ++t) {
            double lw = std::log(hp_.h_t + counts_.type[t]);
            const std::uint32_t* row = &counts_.ptopic[t * K_];
            const double denom = counts_.ptopic_sum[t] + k_hp;
            if (hp_.kernel == type_kernel::exact) {
                for (std::uint32_t k : active_) {
                    const double base = row[k] + hp_.h_p;
                    for (std::uint32_t j = 0; j < hist_[k]; ++j) lw += std::log(base + j);
                }
                for (std::uint32_t j = 0; j < n_par; ++j) lw -= std::log(denom + j);
            } else {
                for (std::uint32_t k : active_) lw += hist_[k] * std::log(row[k] + hp_.h_p);
                lw -= n_par * std::log(denom);
            }
            log_scratch_[t] = lw;
            max_log = std::max(max_log, lw);
        }
        for (std::uint32_t k : active_) hist_[k] = 0;

        if (!std::isfinite(max_log)) throw std::logic_error("paragraph-type weights underflowed");
        double total = 0.0;
        for (auto& v : log_scratch_) {
            v = std::exp(v - max_log);
            total += v;
        }
        return total;
    }

    void remove_token(std::size_t i, std::size_t g) {
        const std::uint32_t k = topic_[i];
        if (switch_[i] == switch_value::par) {
            --counts_.ptopic[type_[g] * K_ + k];
            --counts_.ptopic_sum[type_[g]];
        } else {
            const std::size_t d = para_doc_[g];
            --counts_.dtopic[d * K_ + k];
            --counts_.dtopic_sum[d];
        }
        --counts_.wordtopic[static_cast<std::size_t>(word_[i]) * K_ + k];
        --counts_.wordtopic_sum[k];
    }

    void add_token(std::size_t i, std::size_t g) {
        const std::uint32_t k = topic_[i];
        if (switch_[i] == switch_value::par) {
            ++counts_.ptopic[type_[g] * K_ + k];
            ++counts_.ptopic_sum[type_[g]];
        } else {
            const std::size_t d = para_doc_[g];
            ++counts_.dtopic[d * K_ + k];
            ++counts_.dtopic_sum[d];
        }
        ++counts_.wordtopic[static_cast<std::size_t>(word_[i]) * K_ + k];
        ++counts_.wordtopic_sum[k];
    }

    // Single-token weights are bounded ratios, so they are formed directly
    // in linear space; cells s=par occupy [0, K), s=doc [K, 2K).
    double token_block_weights(std::size_t i, std::size_t g) {
        const std::uint32_t t = type_[g];
        const std::size_t d = para_doc_[g];
        const std::uint32_t* prow = &counts_.ptopic[t * K_];
        const std::uint32_t* drow = &counts_.dtopic[d * K_];
        const std::uint32_t* wrow = &counts_.wordtopic[static_cast<std::size_t>(word_[i]) * K_];
        const double v_beta = static_cast<double>(V_) * hp_.beta;
        const double par_scale = hp_.gamma / (counts_.ptopic_sum[t] + K_ * hp_.h_p);
        const double doc_scale = (1.0 - hp_.gamma) / (counts_.dtopic_sum[d] + K_ * hp_.alpha);

        double total = 0.0;
        for (std::uint32_t k = 0; k < K_; ++k) {
            const double word_term = (wrow[k] + hp_.beta) / (counts_.wordtopic_sum[k] + v_beta);
            const double wp = par_scale * (prow[k] + hp_.h_p) * word_term;
            const double wd = doc_scale * (drow[k] + hp_.alpha) * word_term;
            scratch_[k] = wp;
            scratch_[K_ + k] = wd;
            total += wp + wd;
        }
        return total;
    }

    std::pair<switch_value, std::uint32_t> sample_token_block(std::size_t i, std::size_t g) {
        remove_token(i, g);
        const double total = token_block_weights(i, g);
        const std::size_t cell = rng_.categorical(scratch_, total);
        switch_[i] = cell < K_ ? switch_value::par : switch_value::doc;
        topic_[i] = static_cast<std::uint32_t>(cell % K_);
        add_token(i, g);
        return {switch_[i], topic_[i]};
    }

    hyper_params hp_;
    std::uint32_t K_, T_, V_, D_;

    std::vector<std::size_t> doc_para_begin_; // [D + 1]
    std::vector<std::size_t> para_begin_;     // [P + 1] token offsets
    std::vector<std::uint32_t> para_doc_;     // [P]
    std::vector<word_id> word_;               // [N]

    std::vector<std::uint32_t> type_;
    std::vector<switch_value> switch_;
    std::vector<std::uint32_t> topic_;
    count_tables counts_;
    rng rng_;

    std::vector<double> scratch_;
    std::vector<double> log_scratch_;
    std::vector<std::uint32_t> hist_;
    std::vector<std::uint32_t> active_;
};

inline sampler_state init_random(const corpus& c, const hyper_params& hp) { return sampler_state(c, hp); }

/// Log of the collapsed joint p(T, s, z, w | hyperparameters).
inline double joint_log_prob(const sampler_state& state) {
    const auto& hp = state.params();
    const auto& c = state.counts();
    const std::uint32_t K = state.n_topics();

    std::uint64_t n_par = 0;
    for (auto v : c.ptopic_sum) n_par += v;
    const std::uint64_t n_doc = state.n_tokens() - n_par;

    double lp = 0.0;
    if (n_par) {
        if (hp.gamma <= 0.0) return -std::numeric_limits<double>::infinity();
        lp += static_cast<double>(n_par) * std::log(hp.gamma);
    }
    if (n_doc) {
        if (hp.gamma >= 1.0) return -std::numeric_limits<double>::infinity();
        lp += static_cast<double>(n_doc) * std::log1p(-hp.gamma);
    }

    lp += log_dirichlet_multinomial(c.type, state.n_paragraphs(), hp.h_t);
    for (std::uint32_t t = 0; t < state.n_types(); ++t)
        lp += log_dirichlet_multinomial(std::span(c.ptopic).subspan(t * K, K), c.ptopic_sum[t], hp.h_p);
    for (std::uint32_t d = 0; d < state.n_documents(); ++d)
        lp += log_dirichlet_multinomial(std::span(c.dtopic).subspan(static_cast<std::size_t>(d) * K, K),
                                        c.dtopic_sum[d], hp.alpha);

    // Topic-word blocks are stored word-major; accumulate per topic.
    const double v_beta = static_cast<double>(state.vocab_size()) * hp.beta;
    const double lg_beta = std::lgamma(hp.beta);
    for (std::uint32_t k = 0; k < K; ++k)
        lp += std::lgamma(v_beta) - std::lgamma(c.wordtopic_sum[k] + v_beta);
    for (auto v : c.wordtopic)
        if (v) lp += std::lgamma(v + hp.beta) - lg_beta;
    return lp;
}

/// One retained posterior draw.
struct posterior_sample {
    std::uint32_t sweep = 0; // 1-based sweep after which it was taken
    std::vector<std::uint32_t> types;
    std::vector<switch_value> switches;
    std::vector<std::uint32_t> topics;

    friend bool operator==(const posterior_sample&, const posterior_sample&) = default;
};

struct posterior_samples {
    hyper_params params;
    std::uint32_t vocab_size = 0;
    std::vector<posterior_sample> samples;
    std::vector<double> log_prob; // one entry per sweep
};

/// Retains sweep s (1-based) when s > burn_in and (s - burn_in) % lag == 0.
inline bool is_retained_sweep(std::uint32_t sweep, const hyper_params& hp) {
    return sweep > hp.burn_in && (sweep - hp.burn_in) % hp.sample_lag == 0;
}

template <class Observer>
posterior_samples run(const corpus& c, const hyper_params& hp, Observer&& on_sweep) {
    hp.validate();
    sampler_state state(c, hp);
    posterior_samples out;
    out.params = hp;
    out.vocab_size = state.vocab_size();
    out.log_prob.reserve(hp.n_sweeps);
    for (std::uint32_t s = 1; s <= hp.n_sweeps; ++s) {
        state.sweep();
        out.log_prob.push_back(joint_log_prob(state));
        if (is_retained_sweep(s, hp))
            out.samples.push_back({s, state.types(), state.switches(), state.topics()});
        on_sweep(s, state);
    }
    return out;
}

inline posterior_samples run(const corpus& c, const hyper_params& hp) {
    return run(c, hp, [](std::uint32_t, const sampler_state&) {});
}

/// Independent chains in parallel; chain i is seeded with hp.seed + i.
inline std::vector<posterior_samples> run_chains(const corpus& c, const hyper_params& hp, std::uint32_t n_chains) {
    hp.validate();
    if (n_chains < 1) throw validation_error("chain count must be >= 1");
    std::vector<posterior_samples> results(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);
    std::vector<std::thread> workers;
    for (std::uint32_t i = 0; i < n_chains; ++i) {
        workers.emplace_back([&, i] {
            try {
                hyper_params chain_hp = hp;
                chain_hp.seed = hp.seed + i;
                results[i] = run(c, chain_hp);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

} // namespace ptm
