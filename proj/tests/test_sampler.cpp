#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "ptm/sampler.hpp"
#include "ptm/samples_io.hpp"

using namespace ptm;

namespace {

constexpr auto par = switch_value::par;
constexpr auto doc = switch_value::doc;

void expect_rel_near(double expected, double actual, double rel) {
    EXPECT_LE(std::abs(expected - actual), rel * std::abs(expected)) << expected << " vs " << actual;
}

// One document, five paragraphs. Holding out paragraph 0 leaves type counts
// [3, 1] and paragraph-topic counts type 0: [2, 2], type 1: [4, 0]; the
// held-out paragraph carries two par tokens of topic 0.
sampler_state held_out_fixture(type_kernel kernel) {
    auto c = test::make_corpus({{{0, 1}, {0, 1}, {1, 0}, {0}, {1, 1, 0, 0}}}, 2);
    hyper_params hp;
    hp.n_topics = 2;
    hp.n_types = 2;
    hp.h_t = 1.0;
    hp.h_p = 0.5;
    hp.kernel = kernel;
    hp.n_sweeps = 2;
    hp.burn_in = 1;
    hp.sample_lag = 1;
    sampler_state s(c, hp);
    s.assign({1, 0, 0, 0, 1}, {par, par, par, par, par, par, doc, par, par, par, par},
             {0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0});
    return s;
}

void randomize(sampler_state& s, rng& gen) {
    std::vector<std::uint32_t> types(s.n_paragraphs()), topics(s.n_tokens());
    std::vector<switch_value> sw(s.n_tokens());
    for (auto& t : types) t = gen.below(s.n_types());
    for (std::size_t i = 0; i < s.n_tokens(); ++i) {
        topics[i] = gen.below(s.n_topics());
        sw[i] = gen.bernoulli(0.5) ? par : doc;
    }
    s.assign(types, sw, topics);
}

} // namespace

TEST(Rng, UniformInUnitIntervalAndBelowInRange) {
    rng gen(42);
    for (int i = 0; i < 10000; ++i) {
        const double u = gen.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(gen.below(7), 7u);
    }
}

TEST(Rng, CategoricalSkipsZeroWeights) {
    rng gen(1);
    const std::vector<double> w{0.0, 2.0, 0.0, 1.0};
    std::vector<int> hits(4, 0);
    for (int i = 0; i < 30000; ++i) ++hits[gen.categorical(w, 3.0)];
    EXPECT_EQ(hits[0], 0);
    EXPECT_EQ(hits[2], 0);
    EXPECT_NEAR(hits[1] / 30000.0, 2.0 / 3.0, 0.02);
}

TEST(HyperParams, Validation) {
    hyper_params hp;
    EXPECT_NO_THROW(hp.validate());
    hp.burn_in = hp.n_sweeps;
    EXPECT_THROW(hp.validate(), validation_error);
    hp = {};
    hp.gamma = 1.5;
    EXPECT_THROW(hp.validate(), validation_error);
    hp = {};
    hp.alpha = 0.0;
    EXPECT_THROW(hp.validate(), validation_error);
    hp = {};
    hp.n_topics = 0;
    EXPECT_THROW(hp.validate(), validation_error);
}

TEST(InitRandom, SingletonSupports) {
    rng gen(9);
    auto c = test::make_corpus(test::random_structure(gen, 4, 3, 5, 6), 6);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        hyper_params hp;
        hp.n_topics = 1;
        hp.n_types = 1;
        hp.seed = seed;
        auto s = init_random(c, hp);
        for (auto t : s.types()) EXPECT_EQ(t, 0u);
        for (auto k : s.topics()) EXPECT_EQ(k, 0u);
    }
}

TEST(InitRandom, GammaOneMakesEveryTokenPar) {
    rng gen(10);
    auto c = test::make_corpus(test::random_structure(gen, 5, 3, 5, 6), 6);
    hyper_params hp;
    hp.gamma = 1.0;
    auto s = init_random(c, hp);
    for (auto v : s.switches()) EXPECT_EQ(v, par);
}

TEST(InitRandom, DeterministicForSeed) {
    rng gen(11);
    auto c = test::make_corpus(test::random_structure(gen, 5, 3, 5, 6), 6);
    hyper_params hp;
    hp.seed = 77;
    auto a = init_random(c, hp);
    auto b = init_random(c, hp);
    EXPECT_EQ(a.types(), b.types());
    EXPECT_EQ(a.switches(), b.switches());
    EXPECT_EQ(a.topics(), b.topics());
    EXPECT_EQ(a.counts(), b.counts());
    EXPECT_TRUE(a.verify());
}

TEST(ParagraphType, SingleTypeAlwaysZero) {
    rng gen(12);
    auto c = test::make_corpus(test::random_structure(gen, 3, 3, 4, 5), 5);
    hyper_params hp;
    hp.n_types = 1;
    hp.n_topics = 3;
    sampler_state s(c, hp);
    for (int i = 0; i < 20; ++i)
        for (std::size_t g = 0; g < s.n_paragraphs(); ++g) EXPECT_EQ(s.sample_paragraph_type(g), 0u);
}

TEST(ParagraphType, StaticCountsKernelHandValues) {
    auto s = held_out_fixture(type_kernel::static_counts);
    const auto p = s.paragraph_type_probabilities(0);
    // weights 4 * (2.5 / 5)^2 = 1.0 and 2 * (4.5 / 5)^2 = 1.62
    EXPECT_NEAR(p[0], 1.0 / 2.62, 1e-12);
    EXPECT_NEAR(p[1], 1.62 / 2.62, 1e-12);
    EXPECT_NEAR(p[1], 0.618, 5e-4);
}

TEST(ParagraphType, ExactKernelHandValues) {
    auto s = held_out_fixture(type_kernel::exact);
    const auto p = s.paragraph_type_probabilities(0);
    // weights 4 * (2.5 * 3.5) / (5 * 6) and 2 * (4.5 * 5.5) / (5 * 6)
    const double w0 = 4.0 * 2.5 * 3.5 / 30.0, w1 = 2.0 * 4.5 * 5.5 / 30.0;
    EXPECT_NEAR(p[0], w0 / (w0 + w1), 1e-12);
    EXPECT_NEAR(p[1], w1 / (w0 + w1), 1e-12);
}

TEST(ParagraphType, ZeroParTokensGivesPrior) {
    for (auto kernel : {type_kernel::exact, type_kernel::static_counts}) {
        auto s = held_out_fixture(kernel);
        // paragraph 3 holds a single doc token; held-out type counts are [2, 2]
        auto p = s.paragraph_type_probabilities(3);
        EXPECT_NEAR(p[0], 0.5, 1e-12);
        EXPECT_NEAR(p[1], 0.5, 1e-12);
    }
}

TEST(ParagraphType, ProbabilityQueryLeavesStateUntouched) {
    auto s = held_out_fixture(type_kernel::exact);
    const auto before = s.counts();
    s.paragraph_type_probabilities(0);
    s.token_block_probabilities(3);
    EXPECT_EQ(s.counts(), before);
}

TEST(Kernels, MatchJointRatiosOnToyInstance) {
    const auto model = test::toy_instance();
    auto c = test::make_corpus(model.docs, model.V);
    sampler_state s(c, test::params_for(model));
    rng gen(2024);
    for (int trial = 0; trial < 25; ++trial) {
        randomize(s, gen);
        const auto a = test::to_oracle(s);
        for (std::size_t g = 0; g < s.n_paragraphs(); ++g) {
            const auto want = oracle::type_conditional(model, a, g);
            const auto got = s.paragraph_type_probabilities(g);
            for (std::size_t t = 0; t < want.size(); ++t) expect_rel_near(want[t], got[t], 1e-9);
        }
        for (std::size_t i = 0; i < s.n_tokens(); ++i) {
            const auto want = oracle::block_conditional(model, a, i);
            const auto got = s.token_block_probabilities(i);
            for (std::size_t j = 0; j < want.size(); ++j) expect_rel_near(want[j], got[j], 1e-9);
        }
    }
}

TEST(Kernels, StaticCountsDiffersFromExactWhenTopicsRepeat) {
    auto exact = held_out_fixture(type_kernel::exact);
    auto fixed = held_out_fixture(type_kernel::static_counts);
    EXPECT_GT(std::abs(exact.paragraph_type_probabilities(0)[1] - fixed.paragraph_type_probabilities(0)[1]), 0.03);
}

TEST(TokenBlock, DegenerateGamma) {
    rng gen(13);
    auto c = test::make_corpus(test::random_structure(gen, 4, 3, 5, 6), 6);
    for (double gamma : {0.0, 1.0}) {
        hyper_params hp;
        hp.gamma = gamma;
        hp.n_topics = 3;
        hp.n_types = 2;
        sampler_state s(c, hp);
        for (int sweep = 0; sweep < 20; ++sweep) s.sweep();
        const auto want = gamma == 1.0 ? par : doc;
        for (auto v : s.switches()) EXPECT_EQ(v, want);
        EXPECT_TRUE(std::isfinite(joint_log_prob(s)));
    }
}

TEST(TokenBlock, SingleTopicSwitchProbabilityIsGamma) {
    rng gen(14);
    auto c = test::make_corpus(test::random_structure(gen, 4, 3, 5, 6), 6);
    hyper_params hp;
    hp.n_topics = 1;
    hp.n_types = 3;
    hp.gamma = 0.3;
    sampler_state s(c, hp);
    for (std::size_t i = 0; i < s.n_tokens(); ++i) EXPECT_NEAR(s.token_block_probabilities(i)[0], 0.3, 1e-12);

    std::size_t n_par = 0, n_total = 0;
    for (int sweep = 0; sweep < 2000; ++sweep) {
        s.sweep();
        for (auto v : s.switches()) n_par += v == par;
        n_total += s.n_tokens();
    }
    EXPECT_NEAR(static_cast<double>(n_par) / n_total, 0.3, 0.01);
}

TEST(Sweep, CountsConsistentAndTokensConserved) {
    rng gen(15);
    auto c = test::make_corpus(test::random_structure(gen, 6, 4, 6, 8), 8);
    hyper_params hp;
    hp.n_topics = 4;
    hp.n_types = 3;
    sampler_state s(c, hp);
    for (int sweep = 0; sweep < 10; ++sweep) {
        s.sweep();
        ASSERT_TRUE(s.verify());
        const auto& k = s.counts();
        const auto total = std::accumulate(k.wordtopic_sum.begin(), k.wordtopic_sum.end(), std::uint64_t{0});
        EXPECT_EQ(total, c.n_tokens());
    }
}

TEST(Sweep, SameSeedSameTrajectory) {
    rng gen(16);
    auto c = test::make_corpus(test::random_structure(gen, 6, 4, 6, 8), 8);
    hyper_params hp;
    hp.n_topics = 4;
    hp.n_types = 3;
    hp.seed = 5;
    sampler_state a(c, hp), b(c, hp);
    for (int sweep = 0; sweep < 10; ++sweep) {
        a.sweep();
        b.sweep();
        ASSERT_EQ(a.types(), b.types());
        ASSERT_EQ(a.switches(), b.switches());
        ASSERT_EQ(a.topics(), b.topics());
    }
}

TEST(Sweep, DocParagraphTokenAddressing) {
    auto c = test::make_corpus({{{0, 1}, {2}}, {{1, 1, 2}}}, 3);
    hyper_params hp;
    hp.n_topics = 2;
    hp.n_types = 2;
    sampler_state s(c, hp);
    EXPECT_EQ(s.paragraph_index(1, 0), 2u);
    EXPECT_EQ(s.token_index(1, 0, 2), 5u);
    EXPECT_THROW(s.token_index(0, 1, 1), std::out_of_range);
    auto [sw, k] = s.sample_token_block(1, 0, 2);
    EXPECT_EQ(s.switches()[5], sw);
    EXPECT_EQ(s.topics()[5], k);
    EXPECT_TRUE(s.verify());
}

TEST(Run, ScheduleRetainsSweeps6_8_10) {
    rng gen(17);
    auto c = test::make_corpus(test::random_structure(gen, 3, 3, 4, 5), 5);
    hyper_params hp;
    hp.n_topics = 2;
    hp.n_types = 2;
    hp.n_sweeps = 10;
    hp.burn_in = 4;
    hp.sample_lag = 2;
    auto out = run(c, hp);
    ASSERT_EQ(out.samples.size(), 3u);
    EXPECT_EQ(out.samples[0].sweep, 6u);
    EXPECT_EQ(out.samples[1].sweep, 8u);
    EXPECT_EQ(out.samples[2].sweep, 10u);
    EXPECT_EQ(out.log_prob.size(), 10u);
}

TEST(Run, BurnInNotBelowSweepsRejected) {
    rng gen(18);
    auto c = test::make_corpus(test::random_structure(gen, 3, 3, 4, 5), 5);
    hyper_params hp;
    hp.n_sweeps = 10;
    hp.burn_in = 10;
    EXPECT_THROW(run(c, hp), validation_error);
}

TEST(Run, ChainsUseConsecutiveSeeds) {
    rng gen(19);
    auto c = test::make_corpus(test::random_structure(gen, 4, 3, 4, 5), 5);
    hyper_params hp;
    hp.n_topics = 3;
    hp.n_types = 2;
    hp.n_sweeps = 6;
    hp.burn_in = 2;
    hp.sample_lag = 2;
    hp.seed = 100;
    auto chains = run_chains(c, hp, 3);
    ASSERT_EQ(chains.size(), 3u);
    for (std::uint32_t i = 0; i < 3; ++i) {
        auto hp_i = hp;
        hp_i.seed = 100 + i;
        auto single = run(c, hp_i);
        EXPECT_EQ(chains[i].samples, single.samples);
        EXPECT_EQ(chains[i].log_prob, single.log_prob);
    }
}

TEST(JointLogProb, SingleTokenClosedForm) {
    auto c = test::make_corpus({{{0}}}, 3);
    hyper_params hp;
    hp.n_topics = 1;
    hp.n_types = 1;
    hp.gamma = 0.7;
    hp.beta = 0.25;
    sampler_state s(c, hp);
    s.assign({0}, {par}, {0});
    // type and topic blocks are singletons and contribute 0; the word block gives beta / (V beta)
    EXPECT_NEAR(joint_log_prob(s), std::log(0.7) + std::log(1.0 / 3.0), 1e-12);
}

TEST(JointLogProb, ImpossibleSwitchIsMinusInfinity) {
    auto c = test::make_corpus({{{0, 1}}}, 2);
    hyper_params hp;
    hp.n_topics = 2;
    hp.n_types = 1;
    hp.gamma = 1.0;
    sampler_state s(c, hp);
    s.assign({0}, {par, doc}, {0, 1});
    EXPECT_EQ(joint_log_prob(s), -std::numeric_limits<double>::infinity());
}

TEST(JointLogProb, MatchesOracleOnRandomStates) {
    const auto model = test::toy_instance();
    auto c = test::make_corpus(model.docs, model.V);
    sampler_state s(c, test::params_for(model));
    rng gen(20);
    for (int trial = 0; trial < 50; ++trial) {
        randomize(s, gen);
        EXPECT_NEAR(joint_log_prob(s), oracle::log_joint(model, test::to_oracle(s)), 1e-10);
    }
}

TEST(JointLogProb, InvariantUnderTopicRelabeling) {
    rng gen(21);
    auto c = test::make_corpus(test::random_structure(gen, 5, 3, 6, 7), 7);
    hyper_params hp;
    hp.n_topics = 4;
    hp.n_types = 3;
    sampler_state s(c, hp);
    for (int sweep = 0; sweep < 3; ++sweep) s.sweep();
    const double before = joint_log_prob(s);
    std::vector<std::uint32_t> perm{2, 0, 3, 1};
    auto topics = s.topics();
    for (auto& k : topics) k = perm[k];
    s.assign(s.types(), s.switches(), topics);
    EXPECT_NEAR(joint_log_prob(s), before, 1e-9);
}

TEST(Chain, ShortRunApproachesEnumeratedMarginals) {
    const auto model = test::toy_instance();
    const auto exact = oracle::enumerate_marginals(model);
    auto c = test::make_corpus(model.docs, model.V);
    sampler_state s(c, test::params_for(model, 3));
    for (int i = 0; i < 200; ++i) s.sweep();
    const int n = 30000;
    std::vector<std::vector<double>> block(s.n_tokens(), std::vector<double>(2 * model.K, 0.0));
    for (int it = 0; it < n; ++it) {
        s.sweep();
        for (std::size_t i = 0; i < s.n_tokens(); ++i)
            block[i][static_cast<std::size_t>(s.switches()[i]) * model.K + s.topics()[i]] += 1.0 / n;
    }
    for (std::size_t i = 0; i < s.n_tokens(); ++i) EXPECT_LT(oracle::total_variation(exact.block[i], block[i]), 0.03);
}

TEST(SamplesIo, RoundTrip) {
    rng gen(22);
    auto c = test::make_corpus(test::random_structure(gen, 3, 3, 4, 5), 5);
    hyper_params hp;
    hp.n_topics = 3;
    hp.n_types = 2;
    hp.n_sweeps = 8;
    hp.burn_in = 2;
    hp.sample_lag = 3;
    hp.seed = 9;
    hp.kernel = type_kernel::static_counts;
    auto out = run(c, hp);
    const auto bytes = serialize_samples(out);
    const auto back = deserialize_samples(bytes);
    EXPECT_EQ(back.samples, out.samples);
    EXPECT_EQ(back.log_prob, out.log_prob);
    EXPECT_EQ(back.vocab_size, out.vocab_size);
    EXPECT_EQ(back.params.seed, 9u);
    EXPECT_EQ(back.params.kernel, type_kernel::static_counts);
    EXPECT_EQ(back.params.gamma, hp.gamma);
    EXPECT_EQ(serialize_samples(back), bytes);

    auto path = test::temp_dir("samples_io") / "s.bin";
    save_samples(path, out);
    EXPECT_EQ(load_samples(path).samples, out.samples);
}

TEST(SamplesIo, RejectsCorruptInput) {
    rng gen(23);
    auto c = test::make_corpus(test::random_structure(gen, 2, 2, 3, 4), 4);
    hyper_params hp;
    hp.n_topics = 2;
    hp.n_types = 2;
    hp.n_sweeps = 3;
    hp.burn_in = 1;
    hp.sample_lag = 1;
    const auto bytes = serialize_samples(run(c, hp));
    EXPECT_THROW(deserialize_samples(bytes.substr(0, bytes.size() - 3)), parse_error);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_samples(bad_magic), parse_error);
    EXPECT_THROW(deserialize_samples(bytes + "x"), parse_error);
}

TEST(SamplesIo, LogProbCsvHasOneRowPerSweep) {
    posterior_samples ps;
    ps.log_prob = {-10.5, -9.25};
    EXPECT_EQ(log_prob_csv(ps), "sweep,logprob\n1,-10.5\n2,-9.25\n");
}
