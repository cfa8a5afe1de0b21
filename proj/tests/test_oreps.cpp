#include "helpers.hpp"

#include "pbmdp/oreps.hpp"

#include <doctest.h>

#include <cmath>

using namespace pbmdp;
using testing::near;

TEST_CASE("zero loss on a uniform kernel gives the uniform occupancy") {
    const auto mdp = make_uniform_layered_mdp(3, 2, 2);
    const auto result = ftrl_update(mdp, FtrlState{LossTable::like(mdp), 0.7});
    const auto uniform = occupancy_of_policy(mdp, Policy::uniform(mdp));
    CHECK(testing::max_diff(result.q.table(), uniform.table()) < 1e-10);
}

TEST_CASE("single layer reduces to a softmax") {
    for (std::size_t k = 1; k <= 3; ++k) {
        const LayeredMdp mdp(k, {1, 1}, std::vector<double>(k * k, 1.0));
        const auto loss = testing::random_loss(mdp, k, 5.0);
        const double eta = 0.8;
        const auto q = ftrl_update(mdp, FtrlState{loss, eta}).q;
        double z = 0.0;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) z += std::exp(-eta * loss(0, a));
        for (std::size_t a = 0; a < mdp.num_actions(); ++a)
            CHECK(near(q(0, a), std::exp(-eta * loss(0, a)) / z, 1e-10));
    }
}

TEST_CASE("newton solve agrees with the mirror-descent reference") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto mdp = random_layered_mdp(2, 2, 2, 40 + seed);
        const FtrlState state{testing::random_loss(mdp, 50 + seed, 4.0), 0.3 + 0.2 * seed};
        const auto fast = ftrl_update(mdp, state);
        const auto slow = reference_update(mdp, state);
        CHECK(near(ftrl_objective(fast.q, state), ftrl_objective(slow.q, state), 1e-8));
        CHECK(testing::max_diff(fast.q.table(), slow.q.table()) < 1e-6);
        CHECK(flow_residual(mdp, fast.q) < 1e-10);
        CHECK(layer_normalization_residual(mdp, fast.q) < 1e-10);
    }
}

TEST_CASE("the FTRL solution beats every deterministic occupancy in objective") {
    const auto mdp = random_layered_mdp(3, 2, 2, 77);
    const FtrlState state{testing::random_loss(mdp, 78, 3.0), 0.5};
    const double best = ftrl_objective(ftrl_update(mdp, state).q, state);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto q = occupancy_of_policy(mdp, testing::random_policy(mdp, seed));
        CHECK(best <= ftrl_objective(q, state) + 1e-10);
    }
}

TEST_CASE("warm start reproduces the cold solution") {
    const auto mdp = random_layered_mdp(3, 3, 2, 9, true);
    FtrlState state{testing::random_loss(mdp, 10, 2.0), 0.4};
    const auto first = ftrl_update(mdp, state);
    state.cumulative_loss += testing::random_loss(mdp, 11, 0.5);
    const auto warm = ftrl_update(mdp, state, &first.potentials);
    const auto cold = ftrl_update(mdp, state);
    CHECK(testing::max_diff(warm.q.table(), cold.q.table()) < 1e-9);
}

TEST_CASE("kl projection of a feasible point is the identity") {
    const auto mdp = random_layered_mdp(3, 2, 2, 3);
    const auto q = occupancy_of_policy(mdp, testing::random_policy(mdp, 4));
    const auto p = kl_projection(mdp, q.table());
    CHECK(testing::max_diff(p.table(), q.table()) < 1e-10);
}

TEST_CASE("structural reachability") {
    const auto mdp = make_uniform_layered_mdp(3, 2, 2);
    for (bool r : structurally_reachable(mdp)) CHECK(r);
}
