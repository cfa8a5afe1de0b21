#include "pbmdp/po_unknown_learner.hpp"

#include "pbmdp/errors.hpp"

#include <cmath>
#include <string>

namespace pbmdp {

PoUnknownConfig auto_po_unknown_params(std::size_t horizon, std::size_t num_states,
                                std::size_t num_arms, std::size_t episodes) {
    if (num_arms < 2) throw ParameterError("auto_po_unknown_params: need K >= 2 (log K must be positive)");
    if (horizon < 1 || num_states < 1 || episodes < 1)
        throw ParameterError("auto_po_unknown_params: need H, S, T >= 1");
    const double h = static_cast<double>(horizon);
    const double s = static_cast<double>(num_states);
    const double k = static_cast<double>(num_arms);
    const double t = static_cast<double>(episodes);
    const double k5 = std::pow(k, 5.0);
    PoUnknownConfig out;
    out.episodes = episodes;
    out.base.c = 2.0;
    out.base.eta = std::pow(std::log(k), 2.0 / 3.0) /
                   (std::cbrt(h * h * h * h * s * k5) * std::pow(t, 2.0 / 3.0));
    out.base.gamma = std::sqrt(out.base.eta * s * k5 / 2.0);
    out.base.delta = 2.0 * out.base.eta * h * k * k * k / out.base.gamma;
    out.delta_prime = 1.0 / (h * h * h * t);
    if (out.base.gamma > 0.5)
        throw ParameterError("auto_po_unknown_params: gamma = " + std::to_string(out.base.gamma) +
                             " exceeds 1/2 at T = " + std::to_string(episodes));
    if (out.base.eta > 1.0 / (out.base.c * h))
        throw ParameterError("auto_po_unknown_params: eta exceeds 1/(cH)");
    return out;
}

namespace {

void validate(const PoUnknownConfig& config) {
    validate_po_config(config.base, "po-unknown learner");
    if (config.base.gamma >= 1.0)
        throw ParameterError("po-unknown learner: gamma must lie in (0, 1)");
    if (config.episodes < 1) throw ParameterError("po-unknown learner: T must be positive");
    if (!(config.delta_prime > 0.0 && config.delta_prime <= 1.0))
        throw ParameterError("po-unknown learner: delta' must lie in (0, 1]");
}

} // namespace

PoUnknownLearner::PoUnknownLearner(const LayeredMdp& shape, PoUnknownConfig config)
    : shape_(shape_only(shape)),
      config_(config),
      counters_(shape_),
      set_(ConfidenceSet::vacuous(shape_)),
      cumulative_(StateActionTable::like(shape_)) {
    validate(config_);
}

PoUnknownLearner::PoUnknownLearner(const LayeredMdp& shape, PoUnknownConfig config,
                                   ConfidenceSet fixed)
    : shape_(shape_only(shape)),
      config_(config),
      counters_(shape_),
      set_(std::move(fixed)),
      frozen_(true),
      cumulative_(StateActionTable::like(shape_)) {
    validate(config_);
    if (set_.shape().layer_sizes() != shape_.layer_sizes() ||
        set_.shape().num_arms() != shape_.num_arms())
        throw StructuralError("po-unknown learner: confidence set has a different layer structure");
}

EpisodeOutcome PoUnknownLearner::run_episode(EpisodeWorld& world, RandomSource& rng) const {
    const PoLearnerConfig& cfg = config_.base;
    EpisodeOutcome out;
    const Policy softmax = po_policy(cumulative_, cfg.eta);
    std::vector<std::uint8_t> coins;
    out.executed = executed_policy(softmax, cfg.gamma, rng, coins);
    out.mixture = exploration_mixture(softmax, cfg.gamma);
    OccupancyBounds bounds = occupancy_bounds(set_, out.mixture);

    out.record = play_policy(shape_, out.executed, world, rng, FeedbackKind::preference);
    out.record.state_coins = std::move(coins);
    for (const auto& step : out.record.trajectory.steps) {
        const auto row = out.mixture.row(step.state);
        out.record.mixture_policy.emplace_back(row.begin(), row.end());
    }

    out.loss_estimate = po_loss_estimate(out.record, cfg.gamma);
    out.q_estimate = po_q_estimate_unknown(out.record, out.loss_estimate, bounds.upper, cfg.delta);
    out.bonus = dilated_bonus(set_, out.executed, softmax, bounds, cfg.delta, cfg.c).M;
    out.upper_occupancy = std::move(bounds.upper);
    out.lower_occupancy = std::move(bounds.lower);
    return out;
}

void PoUnknownLearner::update(const EpisodeOutcome& outcome) {
    outcome.q_estimate.add_into(cumulative_);
    cumulative_ -= outcome.bonus;
    const bool new_epoch = counters_.record(outcome.record.trajectory);
    if (new_epoch && !frozen_)
        set_ = counters_.confidence_set(static_cast<double>(config_.episodes), config_.delta_prime);
}

} // namespace pbmdp
