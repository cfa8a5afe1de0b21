#include "pbmdp/estimators.hpp"

#include "pbmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pbmdp {

std::optional<std::size_t> EpisodeRecord::step_of(std::size_t state) const {
    for (std::size_t h = 0; h < trajectory.steps.size(); ++h)
        if (trajectory.steps[h].state == state) return h;
    return std::nullopt;
}

std::span<double> SparseRows::row(std::size_t state) {
    for (std::size_t k = 0; k < states_.size(); ++k)
        if (states_[k] == state) return rows_[k];
    states_.push_back(state);
    rows_.emplace_back(width_, 0.0);
    return rows_.back();
}

double SparseRows::value(std::size_t state, std::size_t column) const {
    for (std::size_t k = 0; k < states_.size(); ++k)
        if (states_[k] == state) return rows_[k].at(column);
    return 0.0;
}

void SparseRows::add_into(StateActionTable& table, double scale) const {
    for (std::size_t k = 0; k < states_.size(); ++k) {
        auto dst = table.row(states_[k]);
        for (std::size_t a = 0; a < width_; ++a) dst[a] += scale * rows_[k][a];
    }
}

double SparseRows::max_abs() const {
    double m = 0.0;
    for (const auto& r : rows_)
        for (double v : r) m = std::max(m, std::abs(v));
    return m;
}

double QEstimate::value(std::size_t state, std::size_t action) const {
    for (const auto& e : entries)
        if (e.state == state && e.action == action) return e.value;
    return 0.0;
}

void QEstimate::add_into(StateActionTable& table, double scale) const {
    for (const auto& e : entries) table(e.state, e.action) += scale * e.value;
}

double borda_estimate(const EpisodeRecord& record, std::size_t s, std::size_t arm) {
    const auto h = record.step_of(s);
    if (!h) return 0.0;
    const std::size_t k = record.num_arms;
    const std::size_t action = record.trajectory.steps[*h].action;
    const std::size_t left = left_arm(action, k);
    const std::size_t right = right_arm(action, k);
    const auto& pi = record.step_policy.at(*h);

    double left_marginal = 0.0;
    for (std::size_t j = 0; j < k; ++j) left_marginal += pi[encode_action(arm, j, k)];
    double right_marginal = 0.0;
    for (std::size_t i = 0; i < k; ++i) right_marginal += pi[encode_action(i, right, k)];
    if (!(left_marginal > 0.0) || !(right_marginal > 0.0))
        throw EstimatorDomainError("borda_estimate: zero arm marginal at state " +
                                   std::to_string(s));
    if (left != arm) return 0.0;
    const double o = record.feedback.at(*h);
    return (o - 1.0) / (static_cast<double>(k) * left_marginal * right_marginal);
}

double scaled_borda_estimate(const EpisodeRecord& record, std::size_t s, std::size_t arm,
                             double gamma, std::size_t num_targets, double reach_value) {
    if (!record.explored || record.target != s) return 0.0;
    if (!(reach_value > 0.0))
        throw EstimatorDomainError("scaled_borda_estimate: target state " + std::to_string(s) +
                                   " is unreachable");
    if (!record.step_of(s)) return 0.0;
    return static_cast<double>(num_targets) / (gamma * reach_value) *
           borda_estimate(record, s, arm);
}

SparseRows scaled_borda_rows(const EpisodeRecord& record, double gamma, std::size_t num_targets,
                             double reach_value) {
    SparseRows out(record.num_arms);
    if (!record.explored || !record.target) return out;
    const std::size_t s = *record.target;
    if (!(reach_value > 0.0))
        throw EstimatorDomainError("scaled_borda_rows: target state " + std::to_string(s) +
                                   " is unreachable");
    if (!record.step_of(s)) return out;
    auto row = out.row(s);
    for (std::size_t i = 0; i < record.num_arms; ++i)
        row[i] = scaled_borda_estimate(record, s, i, gamma, num_targets, reach_value);
    return out;
}

SparseRows global_loss_estimate(const SparseRows& scaled_borda, std::size_t num_arms) {
    SparseRows out(num_arms * num_arms);
    for (std::size_t k = 0; k < scaled_borda.size(); ++k) {
        const auto b = scaled_borda.row_at(k);
        auto row = out.row(scaled_borda.state(k));
        for (std::size_t a = 0; a < row.size(); ++a)
            row[a] = -0.5 * (b[left_arm(a, num_arms)] + b[right_arm(a, num_arms)]);
    }
    return out;
}

SparseRows po_loss_estimate(const EpisodeRecord& record, double gamma) {
    const std::size_t k = record.num_arms;
    SparseRows out(k * k);
    for (const auto& step : record.trajectory.steps) {
        if (!record.coin(step.state)) continue;
        std::vector<double> b(k);
        for (std::size_t i = 0; i < k; ++i) b[i] = borda_estimate(record, step.state, i);
        auto row = out.row(step.state);
        for (std::size_t a = 0; a < row.size(); ++a)
            row[a] = -(0.5 * (b[left_arm(a, k)] + b[right_arm(a, k)])) / gamma;
    }
    const double cap = static_cast<double>(k) / gamma;
    if (out.max_abs() > cap * (1.0 + 1e-12))
        throw NumericalError("po_loss_estimate: |lhat| = " + std::to_string(out.max_abs()) +
                             " exceeds K/gamma = " + std::to_string(cap));
    return out;
}

namespace {

// Shared by both Q-estimates; `immediate_scale(s, a)` multiplies lhat(s_h, a_h)
// and `tail_denominator(s, a)` divides L_{h+1}.
template <class Immediate, class TailDenominator>
QEstimate q_estimate(const EpisodeRecord& record, const SparseRows& loss_estimate,
                     Immediate immediate_scale, TailDenominator tail_denominator) {
    const auto& steps = record.trajectory.steps;
    const std::size_t horizon = steps.size();
    const double actions = static_cast<double>(record.num_arms * record.num_arms);
    QEstimate out;
    out.weights.assign(horizon, 0.0);
    out.tail.assign(horizon + 1, 0.0);
    std::vector<double> lhat(horizon, 0.0);
    for (std::size_t h = 0; h < horizon; ++h) {
        lhat[h] = loss_estimate.value(steps[h].state, steps[h].action);
        out.weights[h] = actions * record.mixture_policy.at(h).at(steps[h].action);
    }
    for (std::size_t h = horizon; h-- > 0;) out.tail[h] = out.tail[h + 1] + out.weights[h] * lhat[h];

    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t s = steps[h].state;
        const std::size_t a = steps[h].action;
        double value = 0.0;
        if (lhat[h] != 0.0) value += immediate_scale(s, a) * lhat[h];
        if (out.tail[h + 1] != 0.0) value += out.tail[h + 1] / tail_denominator(s, a);
        out.entries.push_back({s, a, value});
    }
    return out;
}

} // namespace

QEstimate po_q_estimate(const EpisodeRecord& record, const SparseRows& loss_estimate,
                        const OccupancyMeasure& q, double delta) {
    const double actions = static_cast<double>(record.num_arms * record.num_arms);
    return q_estimate(
        record, loss_estimate,
        [&](std::size_t s, std::size_t a) {
            return q(s, a) / (q(s, a) + delta) / (q.marginal(s) / actions);
        },
        [&](std::size_t s, std::size_t a) { return q(s, a) + delta; });
}

QEstimate po_q_estimate_unknown(const EpisodeRecord& record, const SparseRows& loss_estimate,
                                const OccupancyMeasure& upper, double delta) {
    const double actions = static_cast<double>(record.num_arms * record.num_arms);
    return q_estimate(
        record, loss_estimate,
        [&](std::size_t s, std::size_t) { return actions / (upper.marginal(s) + delta); },
        [&](std::size_t s, std::size_t a) { return upper(s, a) + delta; });
}

} // namespace pbmdp
