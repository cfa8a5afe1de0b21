#include "helpers.hpp"

#include "pbmdp/errors.hpp"
#include "pbmdp/global_learner.hpp"
#include "pbmdp/oracle.hpp"
#include "pbmdp/verification.hpp"

#include <doctest.h>

#include <cmath>

using namespace pbmdp;
using testing::near;

TEST_CASE("enumeration of a constant has unit total probability") {
    EnumerationStats stats;
    const double one = enumerate_expectation(
        std::function<double(RandomSource&)>([](RandomSource& rng) {
            rng.bernoulli(0.3);
            const std::vector<double> w = {0.25, 0.0, 0.75};
            rng.categorical(w);
            rng.uniform_index(3);
            return 1.0;
        }),
        &stats);
    CHECK(near(one, 1.0, 1e-12));
    CHECK(stats.atoms == 2 * 2 * 3);
    CHECK(near(stats.total_probability, 1.0, 1e-12));
}

TEST_CASE("enumeration respects its atom budget") {
    const auto run = std::function<double(RandomSource&)>([](RandomSource& rng) {
        for (int i = 0; i < 20; ++i) rng.bernoulli(0.5);
        return 0.0;
    });
    CHECK_THROWS_AS(enumerate_expectation(run, nullptr, 1000), SizeError);
}

TEST_CASE("enumerated visit indicator equals the occupancy") {
    const auto mdp = random_layered_mdp(2, 2, 2, 3);
    const auto pi = testing::random_policy(mdp, 3);
    const auto q = occupancy_of_policy(mdp, pi);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s)
        for (std::size_t a = 0; a < 4; ++a) {
            const double v = enumerate_expectation(std::function<double(RandomSource&)>(
                [&](RandomSource& rng) { return sample_trajectory(mdp, pi, rng).visited(mdp, s, a) ? 1.0 : 0.0; }));
            CHECK(near(v, q(s, a), 1e-12));
        }
}

TEST_CASE("global learner loss estimate is unbiased by enumeration and Monte Carlo") {
    const auto mdp = make_uniform_layered_mdp(2, 2, 2);
    const auto pref = random_preference_model(mdp.num_nonterminal(), 2, 5);
    const auto loss = borda_loss_table(mdp, pref);
    FixedPreferenceEnvironment env(mdp, pref);
    const GlobalLearner learner(mdp, {0.3, 0.5});
    const auto one_episode = [&](RandomSource& transitions, RandomSource& feedback, RandomSource& coins) {
        SimulatedWorld world(mdp, env, transitions, feedback);
        const auto o = learner.run_episode(world, coins);
        std::vector<double> v(loss.data().size(), 0.0);
        for (std::size_t k = 0; k < o.loss_estimate.size(); ++k) {
            const auto row = o.loss_estimate.row_at(k);
            for (std::size_t a = 0; a < row.size(); ++a) v[o.loss_estimate.state(k) * 4 + a] = row[a];
        }
        return v;
    };
    const auto exact = enumerate_expectation(std::function<std::vector<double>(RandomSource&)>(
        [&](RandomSource& rng) { return one_episode(rng, rng, rng); }));
    for (std::size_t i = 0; i < exact.size(); ++i) CHECK(near(exact[i], loss.data()[i], 1e-9));

    PhiloxSource t(1, StreamRole::environment_transitions), f(1, StreamRole::environment_feedback),
        c(1, StreamRole::learner);
    const int n = 1000000;
    std::vector<double> sum(exact.size(), 0.0), sq(exact.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto v = one_episode(t, f, c);
        for (std::size_t j = 0; j < v.size(); ++j) {
            sum[j] += v[j];
            sq[j] += v[j] * v[j];
        }
    }
    for (std::size_t j = 0; j < sum.size(); ++j) {
        const double mean = sum[j] / n;
        const double sd = std::sqrt(std::max(0.0, sq[j] / n - mean * mean) / n);
        CHECK(std::abs(mean - exact[j]) <= 4.0 * sd + 1e-12);
    }
}

TEST_CASE("policy enumeration") {
    const LayeredMdp single(2, {1, 1}, std::vector<double>(4, 1.0));
    const auto found = enumerate_policies(single, [](const Policy&) { return 0.0; });
    CHECK(found.scanned == 4);
    CHECK_THROWS_AS(enumerate_policies(make_uniform_layered_mdp(4, 3, 3), [](const Policy&) { return 0.0; }),
                    SizeError);
}

TEST_CASE("box-simplex vertices stay in the polytope") {
    const std::vector<double> pbar = {0.2, 0.3, 0.5}, conf = {0.1, 0.1, 0.1};
    const auto vertices = box_simplex_vertices(pbar, conf);
    CHECK_FALSE(vertices.empty());
    for (const auto& v : vertices) {
        double total = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            total += v[j];
            CHECK(std::abs(v[j] - pbar[j]) <= conf[j] + 1e-12);
        }
        CHECK(near(total, 1.0, 1e-12));
    }
}

TEST_CASE("ftrl and occupancy checks of the verification suite pass") {
    CHECK(all_passed(check_ftrl(10, 3)));
    CHECK(all_passed(check_occupancy(lemma_suite().front(), 20000, 1)));
}
