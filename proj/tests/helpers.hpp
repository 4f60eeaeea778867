#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "ptm/corpus.hpp"
#include "ptm/rng.hpp"
#include "ptm/sampler.hpp"

namespace test {

namespace fs = std::filesystem;

/// Corpus with words "w0".."w{V-1}" and the given id structure.
inline ptm::corpus make_corpus(const std::vector<std::vector<std::vector<std::uint32_t>>>& docs, std::uint32_t V) {
    std::vector<std::string> words;
    std::vector<std::uint64_t> counts(V, 0);
    for (std::uint32_t w = 0; w < V; ++w) words.push_back("w" + std::to_string(w));
    std::vector<ptm::document> out;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        ptm::document doc{"d" + std::to_string(d), {}};
        for (const auto& p : docs[d]) {
            doc.paragraphs.emplace_back(p.begin(), p.end());
            for (auto w : p) ++counts[w];
        }
        out.push_back(std::move(doc));
    }
    return ptm::corpus(std::move(out), ptm::vocabulary(std::move(words), std::move(counts)));
}

/// Random corpus: paragraph and token counts uniform in [1, max].
inline std::vector<std::vector<std::vector<std::uint32_t>>> random_structure(ptm::rng& gen, std::size_t n_docs,
                                                                            std::uint32_t max_paras,
                                                                            std::uint32_t max_tokens, std::uint32_t V) {
    std::vector<std::vector<std::vector<std::uint32_t>>> docs(n_docs);
    for (auto& d : docs) {
        d.resize(1 + gen.below(max_paras));
        for (auto& p : d) {
            p.resize(1 + gen.below(max_tokens));
            for (auto& w : p) w = gen.below(V);
        }
    }
    return docs;
}

/// 2 documents x 2 paragraphs, at most 3 tokens each, V = 3.
inline oracle::toy_model toy_instance(double gamma = 0.7) {
    oracle::toy_model m;
    m.docs = {{{0, 1, 1}, {2}}, {{0, 2}, {1}}};
    m.V = 3;
    m.K = 2;
    m.T = 2;
    m.alpha = 0.5;
    m.beta = 0.3;
    m.h_p = 0.8;
    m.h_t = 1.0;
    m.gamma = gamma;
    return m;
}

inline ptm::hyper_params params_for(const oracle::toy_model& m, std::uint64_t seed = 1) {
    ptm::hyper_params hp;
    hp.alpha = m.alpha;
    hp.beta = m.beta;
    hp.h_p = m.h_p;
    hp.h_t = m.h_t;
    hp.gamma = m.gamma;
    hp.n_topics = m.K;
    hp.n_types = m.T;
    hp.n_sweeps = 10;
    hp.burn_in = 0;
    hp.sample_lag = 1;
    hp.seed = seed;
    return hp;
}

inline oracle::assignment to_oracle(const ptm::sampler_state& s) {
    oracle::assignment a{s.types(), {}, s.topics()};
    for (auto v : s.switches()) a.s.push_back(static_cast<std::uint8_t>(v));
    return a;
}

/// Fresh, empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("ptm_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline fs::path data_dir() { return fs::path(PTM_TEST_DATA_DIR); }

} // namespace test
