#include "helpers.hpp"

#include "pbmdp/errors.hpp"
#include "pbmdp/estimators.hpp"

#include <doctest.h>

using namespace pbmdp;
using testing::near;

namespace {

// One step at state `s` with action (left, right) under `policy`.
EpisodeRecord single_step(std::size_t k, std::size_t s, std::size_t left, std::size_t right,
                          bool won, std::vector<double> policy) {
    EpisodeRecord r;
    r.num_arms = k;
    r.trajectory.steps = {{s, encode_action(left, right, k)}};
    r.feedback = {static_cast<std::uint8_t>(won)};
    r.step_policy = {policy};
    r.mixture_policy = {policy};
    r.state_coins.assign(s + 1, 0);
    return r;
}

} // namespace

TEST_CASE("borda estimate by substitution") {
    const auto r = single_step(2, 0, 0, 1, false, {0.25, 0.25, 0.25, 0.25});
    CHECK(near(borda_estimate(r, 0, 0), -2.0, 1e-15));
    CHECK(borda_estimate(r, 0, 1) == 0.0);
    CHECK(borda_estimate(r, 3, 0) == 0.0);  // not visited
    const auto won = single_step(2, 0, 0, 1, true, {0.25, 0.25, 0.25, 0.25});
    CHECK(borda_estimate(won, 0, 0) == 0.0);
    CHECK(borda_estimate(won, 0, 1) == 0.0);
}

TEST_CASE("borda estimate rejects a zero arm marginal") {
    const auto r = single_step(2, 0, 0, 0, false, {1.0, 0.0, 0.0, 0.0});
    CHECK_THROWS_AS(borda_estimate(r, 0, 1), EstimatorDomainError);
}

TEST_CASE("scaled borda estimate") {
    auto r = single_step(2, 2, 0, 1, false, {0.25, 0.25, 0.25, 0.25});
    CHECK(scaled_borda_estimate(r, 2, 0, 0.1, 6, 0.5) == 0.0);  // exploitation episode
    r.explored = true;
    r.target = 2;
    CHECK(near(scaled_borda_estimate(r, 2, 0, 0.1, 6, 0.5), -240.0, 1e-12));
    CHECK_THROWS_AS(scaled_borda_estimate(r, 2, 0, 0.1, 6, 0.0), EstimatorDomainError);
    r.target = 1;  // explored, but the target was missed
    CHECK(scaled_borda_rows(r, 0.1, 6, 0.5).empty());
}

TEST_CASE("global loss estimate from scaled borda rows") {
    SparseRows b(2);
    CHECK(global_loss_estimate(b, 2).empty());
    b.row(1)[0] = -240.0;
    const auto l = global_loss_estimate(b, 2);
    CHECK(l.value(1, encode_action(0, 0, 2)) == 240.0);
    CHECK(l.value(1, encode_action(0, 1, 2)) == 120.0);
    CHECK(l.value(1, encode_action(1, 0, 2)) == 120.0);
    CHECK(l.value(1, encode_action(1, 1, 2)) == 0.0);
}

TEST_CASE("partial loss estimate") {
    auto r = single_step(2, 0, 0, 1, false, {0.25, 0.25, 0.25, 0.25});
    CHECK(po_loss_estimate(r, 0.25).empty());  // coin not set
    r.state_coins[0] = 1;
    const auto l = po_loss_estimate(r, 0.25);
    CHECK(near(l.value(0, encode_action(0, 1, 2)), 4.0, 1e-15));
    CHECK(near(l.value(0, encode_action(0, 0, 2)), 8.0, 1e-15));
    CHECK(l.value(0, encode_action(1, 1, 2)) == 0.0);
    CHECK(l.max_abs() <= 2.0 / 0.25);
}

TEST_CASE("Q estimate with known occupancy") {
    const auto r = single_step(2, 0, 0, 1, false, {0.25, 0.25, 0.25, 0.25});
    SparseRows l(4);
    CHECK(po_q_estimate(r, l, OccupancyMeasure(StateActionTable(1, 4, 0.125)), 0.0).value(0, 1) == 0.0);
    l.row(0)[1] = 4.0;
    const auto q = po_q_estimate(r, l, OccupancyMeasure(StateActionTable(1, 4, 0.125)), 0.0);
    CHECK(near(q.value(0, 1), 32.0, 1e-12));
    const auto shrunk = po_q_estimate(r, l, OccupancyMeasure(StateActionTable(1, 4, 0.125)), 0.125);
    CHECK(near(shrunk.value(0, 1), 16.0, 1e-12));
}

TEST_CASE("Q estimate with upper occupancy") {
    const auto r = single_step(2, 0, 0, 1, false, {0.25, 0.25, 0.25, 0.25});
    SparseRows l(4);
    l.row(0)[1] = 4.0;
    const auto q = po_q_estimate_unknown(r, l, OccupancyMeasure(StateActionTable(1, 4, 0.125)), 0.1);
    CHECK(near(q.value(0, 1), 4.0 / (0.6 / 4.0), 1e-12));
}

TEST_CASE("Q estimate tail propagates importance-weighted later losses") {
    EpisodeRecord r;
    r.num_arms = 2;
    r.trajectory.steps = {{0, 1}, {1, 2}};
    r.feedback = {0, 0};
    r.step_policy = {{0.25, 0.25, 0.25, 0.25}, {0.1, 0.2, 0.3, 0.4}};
    r.mixture_policy = r.step_policy;
    SparseRows l(4);
    l.row(0)[1] = 3.0;
    l.row(1)[2] = 5.0;
    StateActionTable t(3, 4, 0.0);
    for (std::size_t a = 0; a < 4; ++a) {
        t(0, a) = r.step_policy[0][a];
        t(1, a) = 0.5 * r.step_policy[1][a];
    }
    const OccupancyMeasure q(t);
    const double delta = 0.05;
    const auto est = po_q_estimate(r, l, q, delta);
    const double w1 = 4.0 * 0.3;
    CHECK(near(est.tail[1], w1 * 5.0, 1e-14));
    CHECK(near(est.tail[0], 4.0 * 0.25 * 3.0 + w1 * 5.0, 1e-14));
    const double first = q(0, 1) / (q(0, 1) + delta) * 3.0 / (1.0 / 4.0) + w1 * 5.0 / (q(0, 1) + delta);
    CHECK(near(est.value(0, 1), first, 1e-12));
    const double second = q(1, 2) / (q(1, 2) + delta) * 5.0 / (0.5 / 4.0);
    CHECK(near(est.value(1, 2), second, 1e-12));
    CHECK(est.value(1, 3) == 0.0);

    auto table = StateActionTable(3, 4);
    est.add_into(table, 2.0);
    CHECK(near(table(0, 1), 2.0 * first, 1e-12));
}
