#include "pbmdp/po_learner.hpp"

#include "pbmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pbmdp {

PoLearnerConfig auto_po_params(std::size_t horizon, std::size_t num_states,
                                std::size_t num_arms, std::size_t episodes) {
    if (num_arms < 2) throw ParameterError("auto_po_params: need K >= 2 (log K must be positive)");
    if (horizon < 1 || num_states < 1 || episodes < 1)
        throw ParameterError("auto_po_params: need H, S, T >= 1");
    const double h = static_cast<double>(horizon);
    const double s = static_cast<double>(num_states);
    const double k = static_cast<double>(num_arms);
    const double t = static_cast<double>(episodes);
    const double k5 = std::pow(k, 5.0);
    PoLearnerConfig out;
    out.c = 2.0;
    out.eta = std::pow(std::log(k), 2.0 / 3.0) /
              (std::cbrt(h * h * h * s * k5) * std::pow(t, 2.0 / 3.0));
    out.gamma = std::sqrt(16.0 * out.eta * s * k5 / (3.0 * h));
    out.delta = 4.0 * out.eta * h * (k * k) * k / out.gamma;
    if (out.gamma > 0.5)
        throw ParameterError("auto_po_params: gamma = " + std::to_string(out.gamma) +
                             " exceeds 1/2 at T = " + std::to_string(episodes));
    if (out.eta > 1.0 / (out.c * h))
        throw ParameterError("auto_po_params: eta exceeds 1/(cH)");
    return out;
}

void validate_po_config(const PoLearnerConfig& config, const char* who) {
    const std::string w(who);
    if (!(config.eta > 0.0) || !std::isfinite(config.eta))
        throw ParameterError(w + ": eta must be positive");
    if (!(config.gamma > 0.0 && config.gamma <= 1.0))
        throw ParameterError(w + ": gamma must lie in (0, 1]");
    if (!(config.delta >= 0.0) || !std::isfinite(config.delta))
        throw ParameterError(w + ": delta must be nonnegative");
    if (!(config.c >= 0.0) || !std::isfinite(config.c))
        throw ParameterError(w + ": c must be nonnegative");
}

Policy po_policy(const StateActionTable& cumulative, double eta) {
    StateActionTable probs(cumulative.rows(), cumulative.cols());
    for (std::size_t s = 0; s < cumulative.rows(); ++s) {
        const auto in = cumulative.row(s);
        auto out = probs.row(s);
        double top = -std::numeric_limits<double>::infinity();
        for (double v : in) top = std::max(top, -eta * v);
        double total = 0.0;
        for (std::size_t a = 0; a < in.size(); ++a) {
            out[a] = std::exp(-eta * in[a] - top);
            total += out[a];
        }
        for (double& v : out) v /= total;
    }
    return Policy(std::move(probs));
}

Policy exploration_mixture(const Policy& pi, double gamma) {
    StateActionTable probs = pi.table();
    const double floor = gamma / static_cast<double>(probs.cols());
    for (double& v : probs.data()) v = (1.0 - gamma) * v + floor;
    return Policy(std::move(probs));
}

BonusTable compute_bonus(const LayeredMdp& mdp, const Policy& executed, const Policy& softmax,
                         const OccupancyMeasure& q, double delta, double c) {
    const double h = static_cast<double>(mdp.horizon());
    BonusTable out;
    out.m.assign(mdp.num_nonterminal(), 0.0);
    auto source = LossTable::like(mdp);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        double m = 0.0;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const double denom = q(s, a) + delta;
            if (denom > 0.0) m += c * delta * h * softmax(s, a) / denom;
        }
        out.m[s] = m;
        for (double& v : source.row(s)) v = m;
    }
    out.M = value_and_q(mdp, executed, source).q;
    const double bound = c * h * h;
    for (double v : out.M.data())
        if (v > bound * (1.0 + 1e-9) + 1e-12)
            throw NumericalError("compute_bonus: M = " + std::to_string(v) +
                                 " exceeds c H^2 = " + std::to_string(bound));
    return out;
}

Policy executed_policy(const Policy& softmax, double gamma, RandomSource& rng,
                       std::vector<std::uint8_t>& coins) {
    StateActionTable probs = softmax.table();
    coins.assign(probs.rows(), 0);
    const double uniform = 1.0 / static_cast<double>(probs.cols());
    for (std::size_t s = 0; s < probs.rows(); ++s) {
        coins[s] = rng.bernoulli(gamma) ? 1 : 0;
        if (coins[s])
            for (double& v : probs.row(s)) v = uniform;
    }
    return Policy(std::move(probs));
}

PoLearner::PoLearner(const LayeredMdp& mdp, PoLearnerConfig config)
    : mdp_(mdp), config_(config), cumulative_(StateActionTable::like(mdp)) {
    validate_po_config(config, "po learner");
}

EpisodeOutcome PoLearner::run_episode(EpisodeWorld& world, RandomSource& rng) const {
    EpisodeOutcome out;
    const Policy softmax = softmax_policy();
    std::vector<std::uint8_t> coins;
    out.executed = executed_policy(softmax, config_.gamma, rng, coins);
    out.mixture = exploration_mixture(softmax, config_.gamma);
    out.upper_occupancy = occupancy_of_policy(mdp_, out.mixture);

    out.record = play_policy(mdp_, out.executed, world, rng, FeedbackKind::preference);
    out.record.state_coins = std::move(coins);
    for (const auto& step : out.record.trajectory.steps) {
        const auto row = out.mixture.row(step.state);
        out.record.mixture_policy.emplace_back(row.begin(), row.end());
    }

    out.loss_estimate = po_loss_estimate(out.record, config_.gamma);
    out.q_estimate = po_q_estimate(out.record, out.loss_estimate, out.upper_occupancy, config_.delta);
    out.bonus = compute_bonus(mdp_, out.executed, softmax, out.upper_occupancy, config_.delta,
                              config_.c)
                    .M;
    return out;
}

void PoLearner::update(const EpisodeOutcome& outcome) {
    outcome.q_estimate.add_into(cumulative_);
    cumulative_ -= outcome.bonus;
}

} // namespace pbmdp
