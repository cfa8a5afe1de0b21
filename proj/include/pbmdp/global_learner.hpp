#pragma once

#include "pbmdp/learner.hpp"
#include "pbmdp/oreps.hpp"

#include <cstddef>
#include <vector>

namespace pbmdp {

struct GlobalLearnerConfig {
    double gamma = 0.1;
    double eta = 0.1;
};

/// Exploration rate and learning rate tuned for horizon T; S counts all
/// states. Throws ParameterError below the admissible T or if gamma > 1/2.
GlobalLearnerConfig auto_global_params(std::size_t horizon, std::size_t num_states,
                                    std::size_t num_arms, std::size_t episodes);

/// Max-reach occupancy and policy for every non-terminal target.
std::vector<ReachResult> precompute_reach(const LayeredMdp& mdp);

/// Occupancy-space FTRL learner with episode-level uniform exploration.
///
/// With probability 1 - gamma it plays the policy of the entropic FTRL
/// solution on the cumulative loss estimate. Otherwise it draws a target
/// uniformly from the non-terminal states, heads for it with the max-reach
/// policy, compares two independent uniform arms there and plays uniformly
/// from the target's layer on; the only nonzero loss estimate is the target's.
class GlobalLearner final : public Learner {
public:
    GlobalLearner(const LayeredMdp& mdp, GlobalLearnerConfig config);

    std::string_view name() const override { return "global"; }
    EpisodeOutcome run_episode(EpisodeWorld& world, RandomSource& rng) const override;
    void update(const EpisodeOutcome& outcome) override;

    const GlobalLearnerConfig& config() const { return config_; }
    const std::vector<ReachResult>& reach() const { return reach_; }
    const FtrlState& ftrl_state() const { return ftrl_; }
    /// pi^q of the current FTRL solution.
    const Policy& exploit_policy() const;

private:
    LayeredMdp mdp_;
    GlobalLearnerConfig config_;
    std::vector<ReachResult> reach_;
    FtrlState ftrl_;
    std::size_t version_ = 0;

    mutable std::size_t cached_version_ = static_cast<std::size_t>(-1);
    mutable Policy cached_policy_;
    mutable std::vector<double> potentials_;
};

} // namespace pbmdp
