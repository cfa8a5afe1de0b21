#pragma once

#include "pbmdp/mdp.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pbmdp {

/// Bernstein width 4 sqrt(pbar L / max(1,N)) + 28 L / (3 max(1,N)),
/// L = log(T S A / delta').
double conf_width(double count, double pbar, double episodes, double num_states,
                  double num_actions, double delta_prime);

enum class Extreme { max, min };

/// Exact maximizer (or minimizer) of sum_j p_j values_j over distributions p
/// with |p_j - pbar_j| <= conf_j, the boxes clamped to [0,1]. Starts at the
/// lower corner and pours the remaining mass into next states in value order
/// (ties by index). Throws InfeasibleError if the set is empty.
std::vector<double> extremal_transition(std::span<const double> values,
                                        std::span<const double> pbar,
                                        std::span<const double> conf, Extreme mode);

/// Rectangular set of kernels: rows with |P(s'|s,a) - pbar(s'|s,a)| <= width.
/// Rows are laid out like the kernel of `shape`.
class ConfidenceSet {
public:
    /// Every kernel allowed.
    static ConfidenceSet vacuous(const LayeredMdp& shape);
    /// Only the given kernel.
    static ConfidenceSet exact(const LayeredMdp& kernel);

    ConfidenceSet(const LayeredMdp& shape, std::vector<double> pbar, std::vector<double> width);

    const LayeredMdp& shape() const { return shape_; }
    std::span<const double> pbar(std::size_t s, std::size_t a) const;
    std::span<const double> width(std::size_t s, std::size_t a) const;
    /// Whether every row of `kernel` lies in its box (1e-12 slack).
    bool contains(const LayeredMdp& kernel) const;

private:
    std::size_t offset(std::size_t s, std::size_t a) const;

    LayeredMdp shape_;
    std::vector<double> pbar_;
    std::vector<double> width_;
};

/// Visit and transition counters with epoch doubling: an epoch ends once some
/// pair's count reaches twice its count at the epoch start (floored at 1).
class EpochCounters {
public:
    explicit EpochCounters(const LayeredMdp& shape);

    /// Adds the H transitions of a path; returns true if a new epoch starts.
    bool record(const Trajectory& path);

    std::size_t epoch() const { return epoch_; }
    double visits(std::size_t s, std::size_t a) const { return n_[s * actions_ + a]; }
    double transitions(std::size_t s, std::size_t a, std::size_t next) const;
    double snapshot(std::size_t s, std::size_t a) const { return snapshot_[s * actions_ + a]; }
    /// max over pairs of |N(s,a) - sum_s' M(s,a,s')|.
    double count_mismatch() const;

    /// Empirical kernel and widths from the current counts.
    ConfidenceSet confidence_set(double episodes, double delta_prime) const;

private:
    LayeredMdp shape_;
    std::size_t actions_;
    std::size_t epoch_ = 1;
    std::vector<double> n_;
    std::vector<double> m_;  // kernel layout
    std::vector<double> snapshot_;
};

struct OccupancyBounds {
    OccupancyMeasure upper;
    OccupancyMeasure lower;
};

/// Max and min over the confidence set of q^{pi, P}(s,a) for every pair,
/// computed per target state by a backward recursion over earlier layers.
OccupancyBounds occupancy_bounds(const ConfidenceSet& set, const Policy& policy);

/// Bounds for a single target state: (max, min) of its visit probability.
std::pair<double, double> state_reach_bounds(const ConfidenceSet& set, const Policy& policy,
                                             std::size_t target);

struct DilatedBonus {
    std::vector<double> m;
    StateActionTable M;
};

/// m(s) = sum_a' pi~(a'|s) (c delta H + H (qbar - qlow)(s,a')) / (qbar(s,a') + delta),
/// M(s,a) = m(s) + (1 + 1/H) max over the set of E_{s'} E_{a' ~ pi}[M(s',a')].
/// Throws NumericalError above the envelope e (1 + c) H^2.
DilatedBonus dilated_bonus(const ConfidenceSet& set, const Policy& executed,
                           const Policy& softmax, const OccupancyBounds& bounds, double delta,
                           double c);

} // namespace pbmdp
