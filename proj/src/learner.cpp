#include "pbmdp/learner.hpp"

#include <vector>

namespace pbmdp {

std::size_t SimulatedWorld::next_state(std::size_t state, std::size_t action) {
    const std::size_t next_begin = mdp_.layer_begin(mdp_.layer_of(state) + 1);
    return next_begin + transitions_.categorical(mdp_.next_row(state, action));
}

bool SimulatedWorld::compare(std::size_t state, std::size_t left, std::size_t right) {
    return feedback_.bernoulli(env_.preference(state, left, right));
}

double SimulatedWorld::observe_loss(std::size_t state, std::size_t action) {
    return env_.loss_table()(state, action);
}

EpisodeRecord play_policy(const LayeredMdp& shape, const Policy& policy, EpisodeWorld& world,
                          RandomSource& rng, FeedbackKind observe) {
    EpisodeRecord record;
    record.num_arms = shape.num_arms();
    std::size_t state = shape.initial_state();
    for (std::size_t h = 0; h < shape.horizon(); ++h) {
        const auto row = policy.row(state);
        const std::size_t action = rng.categorical(row);
        record.trajectory.steps.push_back({state, action});
        record.step_policy.emplace_back(row.begin(), row.end());
        if (observe == FeedbackKind::preference) {
            const std::size_t k = shape.num_arms();
            record.feedback.push_back(
                world.compare(state, left_arm(action, k), right_arm(action, k)) ? 1 : 0);
        } else {
            record.observed_loss.push_back(world.observe_loss(state, action));
        }
        state = world.next_state(state, action);
    }
    record.trajectory.final_state = state;
    return record;
}

UniformLearner::UniformLearner(const LayeredMdp& shape, FeedbackKind observe)
    : shape_(shape_only(shape)), uniform_(Policy::uniform(shape)), observe_(observe) {}

EpisodeOutcome UniformLearner::run_episode(EpisodeWorld& world, RandomSource& rng) const {
    EpisodeOutcome out;
    out.record = play_policy(shape_, uniform_, world, rng, observe_);
    out.executed = uniform_;
    out.loss_estimate = SparseRows(shape_.num_actions());
    return out;
}

LayeredMdp shape_only(const LayeredMdp& mdp) {
    std::vector<double> kernel;
    kernel.reserve(mdp.kernel().size());
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const std::size_t width = mdp.layer_size(mdp.layer_of(s) + 1);
        for (std::size_t a = 0; a < mdp.num_actions(); ++a)
            kernel.insert(kernel.end(), width, 1.0 / static_cast<double>(width));
    }
    return mdp.with_kernel(std::move(kernel));
}

} // namespace pbmdp
