#pragma once

#include "pbmdp/estimators.hpp"
#include "pbmdp/mdp.hpp"
#include "pbmdp/preference.hpp"
#include "pbmdp/random.hpp"

#include <cstddef>
#include <string_view>

namespace pbmdp {

/// The learner's view of an episode: it can move and ask for feedback, but
/// never sees the kernel or the loss function.
class EpisodeWorld {
public:
    virtual ~EpisodeWorld() = default;
    virtual std::size_t next_state(std::size_t state, std::size_t action) = 0;
    /// One comparison bit: does `left` beat `right` at `state`?
    virtual bool compare(std::size_t state, std::size_t left, std::size_t right) = 0;
    /// Loss of the visited pair (loss-feedback environments only).
    virtual double observe_loss(std::size_t state, std::size_t action) = 0;
};

/// World driven by a true kernel and an environment. Transition and feedback
/// draws come from the two supplied sources.
class SimulatedWorld final : public EpisodeWorld {
public:
    SimulatedWorld(const LayeredMdp& mdp, const Environment& env, RandomSource& transitions,
                   RandomSource& feedback)
        : mdp_(mdp), env_(env), transitions_(transitions), feedback_(feedback) {}

    std::size_t next_state(std::size_t state, std::size_t action) override;
    bool compare(std::size_t state, std::size_t left, std::size_t right) override;
    double observe_loss(std::size_t state, std::size_t action) override;

private:
    const LayeredMdp& mdp_;
    const Environment& env_;
    RandomSource& transitions_;
    RandomSource& feedback_;
};

/// What one episode produced, before the learner's state is updated.
struct EpisodeOutcome {
    EpisodeRecord record;
    /// The Markov policy pi_t that was executed.
    Policy executed;
    /// Exploration mixture (empty for learners without one).
    Policy mixture;
    SparseRows loss_estimate;
    QEstimate q_estimate;
    /// Bonus M_t (empty for learners without one).
    StateActionTable bonus;
    /// Occupancy of the mixture the estimates were built from: exact for the
    /// known-transition learner, upper/lower bounds for the unknown one.
    OccupancyMeasure upper_occupancy;
    OccupancyMeasure lower_occupancy;
};

/// A learner runs an episode without changing its state, then folds the
/// outcome in through `update`. Instances are single-owner.
class Learner {
public:
    virtual ~Learner() = default;
    virtual std::string_view name() const = 0;
    virtual EpisodeOutcome run_episode(EpisodeWorld& world, RandomSource& rng) const = 0;
    virtual void update(const EpisodeOutcome& outcome) = 0;

    EpisodeOutcome step(EpisodeWorld& world, RandomSource& rng) {
        EpisodeOutcome outcome = run_episode(world, rng);
        update(outcome);
        return outcome;
    }
};

/// Walks the episode with `policy`, recording feedback at every step.
/// `observe` selects preference bits or loss values.
EpisodeRecord play_policy(const LayeredMdp& shape, const Policy& policy, EpisodeWorld& world,
                          RandomSource& rng, FeedbackKind observe);

/// Plays the uniform policy and estimates nothing.
class UniformLearner final : public Learner {
public:
    UniformLearner(const LayeredMdp& shape, FeedbackKind observe);
    std::string_view name() const override { return "uniform-baseline"; }
    EpisodeOutcome run_episode(EpisodeWorld& world, RandomSource& rng) const override;
    void update(const EpisodeOutcome&) override {}

private:
    LayeredMdp shape_;
    Policy uniform_;
    FeedbackKind observe_;
};

/// Copy of the layer structure with a uniform kernel, for learners that must
/// not see the true transitions.
LayeredMdp shape_only(const LayeredMdp& mdp);

} // namespace pbmdp
