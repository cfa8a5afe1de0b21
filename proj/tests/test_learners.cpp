#include "helpers.hpp"

#include "pbmdp/errors.hpp"
#include "pbmdp/global_learner.hpp"
#include "pbmdp/po_learner.hpp"
#include "pbmdp/po_unknown_learner.hpp"

#include <doctest.h>

#include <cmath>

using namespace pbmdp;
using testing::near;

namespace {

struct Rig {
    LayeredMdp mdp;
    FixedPreferenceEnvironment env;
    PhiloxSource transitions{1, StreamRole::environment_transitions};
    PhiloxSource feedback{1, StreamRole::environment_feedback};
    PhiloxSource learner{1, StreamRole::learner};
    SimulatedWorld world{mdp, env, transitions, feedback};

    explicit Rig(LayeredMdp m)
        : mdp(std::move(m)), env(mdp, random_preference_model(mdp.num_nonterminal(), mdp.num_arms(), 3)) {}
};

} // namespace

TEST_CASE("theorem3 schedule") {
    const auto p = auto_global_params(3, 6, 2, 100000);
    const double eta = std::cbrt(3.0) * std::pow(std::log(12.0), 2.0 / 3.0) /
                       (std::cbrt(72.0) * std::pow(10.0, 10.0 / 3.0));
    CHECK(near(p.eta, eta, 1e-15));
    CHECK(near(p.gamma, std::sqrt(eta * 72.0 / 6.0), 1e-15));
    CHECK(p.gamma <= 0.5);
    const auto doubled = auto_global_params(3, 6, 2, 200000);
    CHECK(near(doubled.eta / p.eta, std::pow(2.0, -2.0 / 3.0), 1e-12));
    CHECK_THROWS_AS(auto_global_params(3, 6, 2, 10), ParameterError);
}

TEST_CASE("theorem4 schedule") {
    const auto p = auto_po_params(3, 6, 2, 1000000);
    const double eta = std::pow(std::log(2.0), 2.0 / 3.0) / (std::cbrt(27.0 * 6.0 * 32.0) * 1e4);
    CHECK(near(p.eta, eta, 1e-18));
    CHECK(near(p.gamma, std::sqrt(16.0 * eta * 6.0 * 32.0 / 9.0), 1e-15));
    CHECK(near(p.delta, 4.0 * eta * 3.0 * 4.0 * 2.0 / p.gamma, 1e-15));
    CHECK(p.c == 2.0);
    CHECK(p.gamma <= 0.5);
    CHECK(p.eta <= 1.0 / (p.c * 3.0));
    const auto doubled = auto_po_params(3, 6, 2, 2000000);
    CHECK(near(doubled.eta / p.eta, std::pow(2.0, -2.0 / 3.0), 1e-12));
    CHECK(near(doubled.gamma / p.gamma, std::pow(2.0, -1.0 / 3.0), 1e-12));
    CHECK_THROWS_AS(auto_po_params(3, 6, 1, 1000000), ParameterError);
    CHECK_THROWS_AS(auto_po_params(3, 6, 4, 1000), ParameterError);
}

TEST_CASE("theorem5 schedule") {
    const auto p = auto_po_unknown_params(3, 6, 2, 1000000);
    const double eta = std::pow(std::log(2.0), 2.0 / 3.0) / (std::cbrt(81.0 * 6.0 * 32.0) * 1e4);
    CHECK(near(p.base.eta, eta, 1e-18));
    CHECK(near(p.base.gamma, std::sqrt(eta * 6.0 * 32.0 / 2.0), 1e-15));
    CHECK(near(p.base.delta, 2.0 * eta * 3.0 * 8.0 / p.base.gamma, 1e-15));
    CHECK(near(p.delta_prime, 1.0 / (27.0 * 1e6), 1e-20));
    CHECK(p.base.gamma <= 0.5);
    CHECK(p.base.eta <= 1.0 / (2.0 * 3.0));
    const auto doubled = auto_po_unknown_params(3, 6, 2, 2000000);
    CHECK(near(doubled.delta_prime, p.delta_prime / 2.0, 1e-20));
    CHECK_THROWS_AS(auto_po_unknown_params(3, 6, 1, 1000000), ParameterError);
}

TEST_CASE("global learner starts from the uniform zero-loss solution") {
    Rig rig(make_uniform_layered_mdp(3, 2, 2));
    GlobalLearner learner(rig.mdp, {0.2, 0.5});
    const auto uniform = Policy::uniform(rig.mdp);
    CHECK(testing::max_diff(learner.exploit_policy().table(), uniform.table()) < 1e-10);
    for (std::size_t s = 1; s < rig.mdp.num_nonterminal(); ++s) CHECK(near(learner.reach()[s].value, 0.5, 1e-14));
}

TEST_CASE("global learner estimates vanish unless the target is reached") {
    Rig rig(random_layered_mdp(3, 2, 2, 4));
    GlobalLearner learner(rig.mdp, {0.5, 0.3});
    std::size_t explored = 0, missed = 0;
    for (int t = 0; t < 400; ++t) {
        const auto o = learner.step(rig.world, rig.learner);
        if (!o.record.explored) {
            CHECK(o.loss_estimate.empty());
            continue;
        }
        ++explored;
        REQUIRE(o.record.target.has_value());
        if (!o.record.step_of(*o.record.target)) {
            ++missed;
            CHECK(o.loss_estimate.max_abs() == 0.0);
        }
    }
    CHECK(explored > 100);
    CHECK(missed > 0);
    CHECK_THROWS_AS(GlobalLearner(rig.mdp, {0.0, 0.3}), ParameterError);
}

TEST_CASE("po policy is a per-state softmax") {
    StateActionTable cum(2, 4, 0.0);
    auto pi = po_policy(cum, 1.0);
    for (double v : pi.table().data()) CHECK(near(v, 0.25, 1e-15));
    const double gap = 0.7;
    for (std::size_t a = 0; a < 4; ++a) cum(1, a) = a == 2 ? 3.0 - gap : 3.0;
    pi = po_policy(cum, 1.0);
    CHECK(near(pi(1, 2), std::exp(gap) / (std::exp(gap) + 3.0), 1e-14));
}

TEST_CASE("full exploration plays uniformly everywhere") {
    const auto mdp = random_layered_mdp(3, 2, 2, 6);
    StateActionTable cum = testing::random_loss(mdp, 7, 3.0);
    const auto soft = po_policy(cum, 1.0);
    PhiloxSource rng(1, StreamRole::learner);
    std::vector<std::uint8_t> coins;
    const auto pi = executed_policy(soft, 1.0, rng, coins);
    for (auto c : coins) CHECK(c == 1);
    for (double v : pi.table().data()) CHECK(near(v, 0.25, 1e-15));
    const auto mix = exploration_mixture(soft, 1.0);
    for (double v : mix.table().data()) CHECK(near(v, 0.25, 1e-15));
    const auto none = executed_policy(soft, 0.0, rng, coins);
    CHECK(testing::max_diff(none.table(), soft.table()) == 0.0);
}

TEST_CASE("bonus source term") {
    const auto mdp = make_uniform_layered_mdp(3, 2, 2);
    const auto soft = Policy::uniform(mdp);
    const auto b = compute_bonus(mdp, soft, soft, OccupancyMeasure(StateActionTable::like(mdp, 0.15)), 0.1, 2.0);
    for (double m : b.m) CHECK(near(m, 2.4, 1e-12));
    const auto unreachable = compute_bonus(mdp, soft, soft, OccupancyMeasure(StateActionTable::like(mdp)), 0.1, 2.0);
    for (double m : unreachable.m) CHECK(near(m, 6.0, 1e-12));
    // Last layer: M = m; first layer: M = m + sum over the two later layers.
    CHECK(near(unreachable.M(3, 0), 6.0, 1e-12));
    CHECK(near(unreachable.M(0, 0), 18.0, 1e-12));
    const auto none = compute_bonus(mdp, soft, soft, occupancy_of_policy(mdp, soft), 0.0, 2.0);
    for (double v : none.M.data()) CHECK(v == 0.0);
}

TEST_CASE("po learner: first policy is uniform and unexplored episodes only add the bonus") {
    Rig rig(random_layered_mdp(3, 2, 2, 12));
    PoLearner learner(rig.mdp, {0.2, 1e-9, 0.1, 2.0});
    const Policy initial = learner.softmax_policy();
    for (double v : initial.table().data()) CHECK(near(v, 0.25, 1e-15));
    const auto o = learner.run_episode(rig.world, rig.learner);
    for (auto c : o.record.state_coins) REQUIRE(c == 0);
    CHECK(o.loss_estimate.max_abs() == 0.0);
    for (const auto& e : o.q_estimate.entries) CHECK(e.value == 0.0);
    learner.update(o);
    auto expected = StateActionTable::like(rig.mdp);
    expected -= o.bonus;
    CHECK(testing::max_diff(learner.cumulative(), expected) < 1e-15);
}

TEST_CASE("po learner bonus respects its bound along a run") {
    Rig rig(random_layered_mdp(3, 2, 2, 13));
    PoLearner learner(rig.mdp, {0.05, 0.3, 0.05, 2.0});
    for (int t = 0; t < 300; ++t) {
        const auto o = learner.step(rig.world, rig.learner);
        for (double v : o.bonus.data()) CHECK(v <= 2.0 * 9.0 + 1e-9);
        CHECK(o.loss_estimate.max_abs() <= 2.0 / 0.3 + 1e-12);
    }
}

TEST_CASE("po-unknown learner: vacuous first episode and monotone epochs") {
    const auto mdp = make_uniform_layered_mdp(2, 2, 2);
    Rig rig(mdp);
    PoUnknownConfig cfg{{0.05, 0.3, 0.05, 2.0}, 3000, 1.0 / (8.0 * 3000.0)};
    PoUnknownLearner learner(mdp, cfg);
    const auto first = learner.run_episode(rig.world, rig.learner);
    for (std::size_t s = 1; s < 3; ++s) {
        CHECK(near(first.upper_occupancy.marginal(s), 1.0, 1e-12));
        CHECK(first.lower_occupancy.marginal(s) == doctest::Approx(0.0).epsilon(1e-12));
    }
    learner.update(first);
    std::size_t epoch = learner.counters().epoch();
    for (int t = 1; t < 3000; ++t) {
        learner.step(rig.world, rig.learner);
        CHECK(learner.counters().epoch() >= epoch);
        epoch = learner.counters().epoch();
    }
    const double bound = 10.0 * mdp.num_states() * mdp.num_actions() * std::log2(3000.0);
    CHECK(epoch <= bound);
    CHECK(epoch > 1);
    CHECK(learner.confidence_set().contains(mdp));
    CHECK(learner.counters().count_mismatch() == 0.0);
}
