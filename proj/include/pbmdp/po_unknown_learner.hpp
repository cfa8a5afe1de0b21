#pragma once

#include "pbmdp/confidence.hpp"
#include "pbmdp/learner.hpp"
#include "pbmdp/po_learner.hpp"

#include <cstddef>
#include <optional>

namespace pbmdp {

struct PoUnknownConfig {
    PoLearnerConfig base;
    /// Horizon T used in the confidence widths.
    std::size_t episodes = 1;
    double delta_prime = 1.0;
};

/// Schedule for horizon T with A = K^2, delta' = 1/(H^3 T); S counts all
/// states. Throws ParameterError for K < 2, gamma > 1/2 or eta > 1/(cH).
PoUnknownConfig auto_po_unknown_params(std::size_t horizon, std::size_t num_states,
                                std::size_t num_arms, std::size_t episodes);

/// Policy optimization when transitions are unknown: the learner keeps visit
/// counters, refreshes a Bernstein confidence set whenever a count doubles,
/// and replaces the exact mixture occupancy by its upper/lower bounds over
/// the set. It only ever sees the layer structure of the MDP.
class PoUnknownLearner final : public Learner {
public:
    PoUnknownLearner(const LayeredMdp& shape, PoUnknownConfig config);
    /// Uses `fixed` for every episode and never refreshes it.
    PoUnknownLearner(const LayeredMdp& shape, PoUnknownConfig config, ConfidenceSet fixed);

    std::string_view name() const override { return "po-unknown"; }
    EpisodeOutcome run_episode(EpisodeWorld& world, RandomSource& rng) const override;
    void update(const EpisodeOutcome& outcome) override;

    const PoUnknownConfig& config() const { return config_; }
    const EpochCounters& counters() const { return counters_; }
    const ConfidenceSet& confidence_set() const { return set_; }
    const StateActionTable& cumulative() const { return cumulative_; }

private:
    LayeredMdp shape_;
    PoUnknownConfig config_;
    EpochCounters counters_;
    ConfidenceSet set_;
    bool frozen_ = false;
    StateActionTable cumulative_;
};

} // namespace pbmdp
