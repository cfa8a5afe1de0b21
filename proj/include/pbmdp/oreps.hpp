#pragma once

#include "pbmdp/mdp.hpp"

#include <cstddef>
#include <vector>

namespace pbmdp {

/// Cumulative loss estimate and learning rate of an FTRL learner.
struct FtrlState {
    LossTable cumulative_loss;
    double eta = 1.0;
};

/// <q, L> + (1/eta) sum q log q, the FTRL objective (zero entries contribute 0).
double ftrl_objective(const OccupancyMeasure& q, const FtrlState& state);

struct FtrlResult {
    OccupancyMeasure q;
    /// Dual potentials per state (terminal and unreachable states hold 0).
    std::vector<double> potentials;
    std::size_t iterations = 0;
    double duality_gap = 0.0;
    double max_residual = 0.0;
    bool used_reference = false;
};

/// Minimizer of the FTRL objective over the occupancy polytope.
///
/// Newton's method on the dual in the per-state potentials u, where
/// log q(s,a) = -1 - eta L(s,a) - u(s) + sum_s' P(s'|s,a) u(s'). Losses are
/// shifted per layer by their minimum first. Falls back to `reference_update`
/// when Newton stalls or the duality gap exceeds 1e-8 relative; throws
/// NumericalError if both fail. `warm_start` may hold previous potentials.
FtrlResult ftrl_update(const LayeredMdp& mdp, const FtrlState& state,
                       const std::vector<double>* warm_start = nullptr);

struct ReferenceResult {
    OccupancyMeasure q;
    std::vector<double> objective_history;
    std::size_t iterations = 0;
    double max_residual = 0.0;
};

/// Entropic mirror descent with step eta/2, each iterate projected onto the
/// polytope in KL divergence by cyclic scaling onto the flow constraints.
/// Stops once successive iterates agree to 1e-10 in sup-norm log ratio.
ReferenceResult reference_update(const LayeredMdp& mdp, const FtrlState& state,
                                 std::size_t max_iterations = 500);

/// KL projection of a positive table onto the occupancy polytope.
OccupancyMeasure kl_projection(const LayeredMdp& mdp, const StateActionTable& y,
                               double tolerance = 1e-14, std::size_t max_sweeps = 100000);

/// States reachable from the initial state under some action sequence.
std::vector<bool> structurally_reachable(const LayeredMdp& mdp);

} // namespace pbmdp
