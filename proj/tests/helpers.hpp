#pragma once

#include "pbmdp/mdp.hpp"
#include "pbmdp/preference.hpp"
#include "pbmdp/random.hpp"

#include <cmath>
#include <vector>

namespace testing {

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline double max_diff(const pbmdp::StateActionTable& a, const pbmdp::StateActionTable& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// One state per layer; every row is the point mass on the next state.
inline pbmdp::LayeredMdp chain_mdp(std::size_t horizon, std::size_t arms) {
    return pbmdp::make_uniform_layered_mdp(horizon, 1, arms);
}

inline pbmdp::Policy random_policy(const pbmdp::LayeredMdp& mdp, std::uint64_t seed) {
    pbmdp::PhiloxSource rng(seed, pbmdp::StreamRole::instance, 77);
    auto table = pbmdp::StateActionTable::like(mdp);
    for (std::size_t s = 0; s < table.rows(); ++s) {
        double total = 0.0;
        for (double& v : table.row(s)) total += (v = 0.05 + rng.uniform01());
        for (double& v : table.row(s)) v /= total;
    }
    return pbmdp::Policy(std::move(table));
}

inline pbmdp::LossTable random_loss(const pbmdp::LayeredMdp& mdp, std::uint64_t seed,
                                    double scale = 1.0) {
    pbmdp::PhiloxSource rng(seed, pbmdp::StreamRole::instance, 78);
    auto table = pbmdp::LossTable::like(mdp);
    for (double& v : table.data()) v = scale * rng.uniform01();
    return table;
}

} // namespace testing
