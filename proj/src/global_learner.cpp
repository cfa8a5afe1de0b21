#include "pbmdp/global_learner.hpp"

#include "pbmdp/errors.hpp"

#include <cmath>
#include <string>

namespace pbmdp {

GlobalLearnerConfig auto_global_params(std::size_t horizon, std::size_t num_states,
                                    std::size_t num_arms, std::size_t episodes) {
    const double h = static_cast<double>(horizon);
    const double s = static_cast<double>(num_states);
    const double k = static_cast<double>(num_arms);
    const double t = static_cast<double>(episodes);
    if (horizon < 1 || num_states < 1 || num_arms < 1 || s * k < 2.0)
        throw ParameterError("auto_global_params: need H >= 1 and S K >= 2");
    const double threshold = 8.0 * s * s * k * std::log(s * k) / (h * h);
    if (t < threshold)
        throw ParameterError("auto_global_params: T = " + std::to_string(episodes) +
                             " is below the admissible threshold 8 S^2 K log(SK) / H^2 = " +
                             std::to_string(threshold));
    GlobalLearnerConfig out;
    out.eta = std::cbrt(h) * std::pow(std::log(s * k), 2.0 / 3.0) /
              (std::cbrt(s * s * k) * std::pow(t, 2.0 / 3.0));
    out.gamma = std::sqrt(out.eta * s * s * k / (2.0 * h));
    if (out.gamma > 0.5)
        throw ParameterError("auto_global_params: gamma = " + std::to_string(out.gamma) +
                             " exceeds 1/2");
    return out;
}

std::vector<ReachResult> precompute_reach(const LayeredMdp& mdp) {
    std::vector<ReachResult> out;
    out.reserve(mdp.num_nonterminal());
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) out.push_back(max_reach(mdp, s));
    return out;
}

GlobalLearner::GlobalLearner(const LayeredMdp& mdp, GlobalLearnerConfig config)
    : mdp_(mdp), config_(config), reach_(precompute_reach(mdp)) {
    if (!(config.gamma > 0.0 && config.gamma <= 1.0))
        throw ParameterError("global learner: gamma must lie in (0, 1]");
    if (!(config.eta > 0.0) || !std::isfinite(config.eta))
        throw ParameterError("global learner: eta must be positive");
    ftrl_.cumulative_loss = LossTable::like(mdp);
    ftrl_.eta = config.eta;
}

const Policy& GlobalLearner::exploit_policy() const {
    if (cached_version_ != version_) {
        auto result = ftrl_update(mdp_, ftrl_, potentials_.empty() ? nullptr : &potentials_);
        if (!result.used_reference) potentials_ = std::move(result.potentials);
        cached_policy_ = policy_of_occupancy(result.q);
        cached_version_ = version_;
    }
    return cached_policy_;
}

EpisodeOutcome GlobalLearner::run_episode(EpisodeWorld& world, RandomSource& rng) const {
    EpisodeOutcome out;
    const std::size_t k = mdp_.num_arms();
    const bool explore = rng.bernoulli(config_.gamma);
    if (!explore) {
        out.executed = exploit_policy();
        out.record = play_policy(mdp_, out.executed, world, rng, FeedbackKind::preference);
        out.loss_estimate = SparseRows(mdp_.num_actions());
        return out;
    }

    const std::size_t targets = mdp_.num_nonterminal();
    const std::size_t target = rng.uniform_index(targets);
    const ReachResult& reach = reach_[target];
    if (!(reach.value > 0.0))
        throw EstimatorDomainError("global learner: target state " + std::to_string(target) +
                                   " is unreachable");
    out.executed = reach.policy;

    EpisodeRecord& record = out.record;
    record.num_arms = k;
    record.explored = true;
    record.target = target;
    std::size_t state = mdp_.initial_state();
    for (std::size_t h = 0; h < mdp_.horizon(); ++h) {
        const auto row = out.executed.row(state);
        std::size_t action;
        if (state == target) {
            const std::size_t left = rng.uniform_index(k);
            const std::size_t right = rng.uniform_index(k);
            action = encode_action(left, right, k);
        } else {
            action = rng.categorical(row);
        }
        record.trajectory.steps.push_back({state, action});
        record.step_policy.emplace_back(row.begin(), row.end());
        record.feedback.push_back(
            world.compare(state, left_arm(action, k), right_arm(action, k)) ? 1 : 0);
        state = world.next_state(state, action);
    }
    record.trajectory.final_state = state;

    out.loss_estimate =
        global_loss_estimate(scaled_borda_rows(record, config_.gamma, targets, reach.value), k);
    return out;
}

void GlobalLearner::update(const EpisodeOutcome& outcome) {
    if (outcome.loss_estimate.empty() || outcome.loss_estimate.max_abs() == 0.0) return;
    outcome.loss_estimate.add_into(ftrl_.cumulative_loss);
    ++version_;
}

} // namespace pbmdp
