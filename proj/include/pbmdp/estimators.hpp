#pragma once

#include "pbmdp/mdp.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pbmdp {

/// Everything observed or drawn during one episode.
///
/// `step_policy[h]` is the row pi_t(.|s_h) actually used at step h and
/// `mixture_policy[h]` the row of the exploration mixture at s_h (empty when
/// the learner has no mixture). Per-state coins are indexed by state.
struct EpisodeRecord {
    std::size_t num_arms = 0;
    Trajectory trajectory;
    std::vector<std::uint8_t> feedback;
    std::vector<double> observed_loss;
    bool explored = false;
    std::optional<std::size_t> target;
    std::vector<std::uint8_t> state_coins;
    std::vector<std::vector<double>> step_policy;
    std::vector<std::vector<double>> mixture_policy;

    /// Step at which `state` was visited, by scanning the path.
    std::optional<std::size_t> step_of(std::size_t state) const;
    bool coin(std::size_t state) const {
        return state < state_coins.size() && state_coins[state] != 0;
    }
};

/// Rows of a state-indexed table that are nonzero in one episode.
class SparseRows {
public:
    SparseRows() = default;
    explicit SparseRows(std::size_t width) : width_(width) {}

    std::size_t width() const { return width_; }
    std::size_t size() const { return states_.size(); }
    bool empty() const { return states_.empty(); }
    std::size_t state(std::size_t k) const { return states_[k]; }
    std::span<const double> row_at(std::size_t k) const { return rows_[k]; }

    /// Appends a zero row for `state` (or returns the existing one).
    std::span<double> row(std::size_t state);
    double value(std::size_t state, std::size_t column) const;
    /// table(s, .) += scale * row for every stored row.
    void add_into(StateActionTable& table, double scale = 1.0) const;
    double max_abs() const;

private:
    std::size_t width_ = 0;
    std::vector<std::size_t> states_;
    std::vector<std::vector<double>> rows_;
};

struct QEntry {
    std::size_t state;
    std::size_t action;
    double value;
};

/// Q-estimate supported on the visited pairs, with the importance weights
/// w_k and tail sums L_h = sum_{k >= h} w_k lhat(s_k, a_k), L_H = 0.
struct QEstimate {
    std::vector<QEntry> entries;
    std::vector<double> weights;
    std::vector<double> tail;

    double value(std::size_t state, std::size_t action) const;
    void add_into(StateActionTable& table, double scale = 1.0) const;
};

/// Importance-weighted Borda score estimate at a visited state.
/// Zero unless the left arm played at `s` is `arm`; throws
/// EstimatorDomainError if either arm marginal of the step policy is zero.
double borda_estimate(const EpisodeRecord& record, std::size_t s, std::size_t arm);

/// (S/(gamma r)) * bhat on an exploration episode whose target s was reached,
/// zero otherwise. `num_targets` is the size of the set the target was drawn
/// from. Throws EstimatorDomainError when the reach value r is not positive.
double scaled_borda_estimate(const EpisodeRecord& record, std::size_t s, std::size_t arm,
                             double gamma, std::size_t num_targets, double reach_value);

/// All nonzero scaled Borda rows (K wide) of an episode.
SparseRows scaled_borda_rows(const EpisodeRecord& record, double gamma, std::size_t num_targets,
                             double reach_value);

/// lhat(s,a) = -(btilde(s, left) + btilde(s, right)) / 2, A wide.
SparseRows global_loss_estimate(const SparseRows& scaled_borda, std::size_t num_arms);

/// lhat(s,a) = -(1/gamma) (bhat(s, left) + bhat(s, right)) / 2 on visited
/// states whose coin is set. Throws NumericalError if |lhat| exceeds K/gamma.
SparseRows po_loss_estimate(const EpisodeRecord& record, double gamma);

/// Known-transition Q-estimate built from the mixture occupancy q.
QEstimate po_q_estimate(const EpisodeRecord& record, const SparseRows& loss_estimate,
                        const OccupancyMeasure& q, double delta);

/// Unknown-transition Q-estimate built from the upper occupancy bound;
/// the immediate term divides by (qbar(s) + delta)/A.
QEstimate po_q_estimate_unknown(const EpisodeRecord& record, const SparseRows& loss_estimate,
                                const OccupancyMeasure& upper, double delta);

} // namespace pbmdp
