#pragma once

#include "pbmdp/learner.hpp"

#include <cstddef>
#include <vector>

namespace pbmdp {

struct PoLearnerConfig {
    double eta = 0.01;
    double gamma = 0.1;
    double delta = 0.1;
    double c = 2.0;
};

/// Schedule for horizon T with A = K^2; S counts all states. Throws
/// ParameterError for K < 2, gamma > 1/2 or eta > 1/(cH).
PoLearnerConfig auto_po_params(std::size_t horizon, std::size_t num_states,
                                std::size_t num_arms, std::size_t episodes);

/// Per-state softmax of -eta * cumulative with row-max subtraction.
Policy po_policy(const StateActionTable& cumulative, double eta);

/// (1 - gamma) pi + gamma / A.
Policy exploration_mixture(const Policy& pi, double gamma);

struct BonusTable {
    std::vector<double> m;  // per non-terminal state
    StateActionTable M;
};

/// m(s) = sum_a' c delta H pi~(a'|s) / (q(s,a') + delta) and M = Q^{pi}(.,.; m)
/// under the executed policy. Throws NumericalError if M exceeds c H^2.
BonusTable compute_bonus(const LayeredMdp& mdp, const Policy& executed, const Policy& softmax,
                         const OccupancyMeasure& q, double delta, double c);

/// Draws one coin per non-terminal state (in index order) and builds the
/// executed policy: uniform where the coin is set, `softmax` elsewhere.
Policy executed_policy(const Policy& softmax, double gamma, RandomSource& rng,
                       std::vector<std::uint8_t>& coins);

/// Policy optimization with per-state exploration coins, importance-weighted
/// Q-estimates and an exploration bonus, for known transitions.
class PoLearner final : public Learner {
public:
    PoLearner(const LayeredMdp& mdp, PoLearnerConfig config);

    std::string_view name() const override { return "po"; }
    EpisodeOutcome run_episode(EpisodeWorld& world, RandomSource& rng) const override;
    void update(const EpisodeOutcome& outcome) override;

    const PoLearnerConfig& config() const { return config_; }
    /// Running sum of Qhat - M.
    const StateActionTable& cumulative() const { return cumulative_; }
    Policy softmax_policy() const { return po_policy(cumulative_, config_.eta); }

private:
    LayeredMdp mdp_;
    PoLearnerConfig config_;
    StateActionTable cumulative_;
};

/// Shared checks for the policy-optimization configs.
void validate_po_config(const PoLearnerConfig& config, const char* who);

} // namespace pbmdp
