#pragma once

#include "pbmdp/random.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace pbmdp {

/// Episodic MDP whose states are split into layers 0..H, with singleton first
/// and last layers and transitions that move exactly one layer forward.
///
/// States are dense indices grouped by layer: state 0 is the initial state and
/// state S-1 the terminal one. Actions are arm pairs (left, right) over K arms,
/// encoded as `left * K + right`. The kernel is stored row by row: for every
/// non-terminal state and action, one probability per state of the next layer.
class LayeredMdp {
public:
    /// Invariants checked: first/last layer sizes are 1, every layer is
    /// non-empty, rows are nonnegative and sum to one within 1e-12.
    LayeredMdp(std::size_t num_arms, std::vector<std::size_t> layer_sizes,
               std::vector<double> kernel);

    std::size_t horizon() const { return layer_sizes_.size() - 1; }
    std::size_t num_arms() const { return num_arms_; }
    std::size_t num_actions() const { return num_arms_ * num_arms_; }
    std::size_t num_states() const { return layer_of_.size(); }
    std::size_t num_nonterminal() const { return layer_of_.size() - 1; }
    std::size_t initial_state() const { return 0; }
    std::size_t terminal_state() const { return layer_of_.size() - 1; }

    std::size_t layer_of(std::size_t state) const { return layer_of_.at(state); }
    std::size_t layer_begin(std::size_t layer) const { return layer_begin_.at(layer); }
    std::size_t layer_size(std::size_t layer) const { return layer_sizes_.at(layer); }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }

    /// Distribution over the states of layer h(s)+1 (index j is state
    /// layer_begin(h(s)+1) + j).
    std::span<const double> next_row(std::size_t state, std::size_t action) const;
    double transition(std::size_t state, std::size_t action, std::size_t next) const;

    const std::vector<double>& kernel() const { return kernel_; }
    /// Same layer structure with a different kernel (validated).
    LayeredMdp with_kernel(std::vector<double> kernel) const;

private:
    std::size_t row_offset(std::size_t state, std::size_t action) const;

    std::size_t num_arms_;
    std::vector<std::size_t> layer_sizes_;
    std::vector<std::size_t> layer_begin_;
    std::vector<std::size_t> layer_of_;
    std::vector<std::size_t> state_offset_;
    std::vector<double> kernel_;
};

inline std::size_t encode_action(std::size_t left, std::size_t right, std::size_t num_arms) {
    return left * num_arms + right;
}
inline std::size_t left_arm(std::size_t action, std::size_t num_arms) { return action / num_arms; }
inline std::size_t right_arm(std::size_t action, std::size_t num_arms) { return action % num_arms; }

/// Dense table over (non-terminal state, action).
class StateActionTable {
public:
    StateActionTable() = default;
    StateActionTable(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static StateActionTable like(const LayeredMdp& mdp, double fill = 0.0) {
        return StateActionTable(mdp.num_nonterminal(), mdp.num_actions(), fill);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t s, std::size_t a) { return data_[s * cols_ + a]; }
    double operator()(std::size_t s, std::size_t a) const { return data_[s * cols_ + a]; }
    std::span<double> row(std::size_t s) { return {data_.data() + s * cols_, cols_}; }
    std::span<const double> row(std::size_t s) const { return {data_.data() + s * cols_, cols_}; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    StateActionTable& operator+=(const StateActionTable& other);
    StateActionTable& operator-=(const StateActionTable& other);
    bool same_shape(const StateActionTable& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

using LossTable = StateActionTable;

/// Markov policy: a distribution over actions for every non-terminal state.
class Policy {
public:
    Policy() = default;
    /// Throws StructuralError unless every row is a distribution (1e-12).
    explicit Policy(StateActionTable probabilities);

    static Policy uniform(const LayeredMdp& mdp);
    /// One action per non-terminal state.
    static Policy deterministic(const LayeredMdp& mdp, std::span<const std::size_t> actions);

    double operator()(std::size_t s, std::size_t a) const { return probs_(s, a); }
    std::span<const double> row(std::size_t s) const { return probs_.row(s); }
    const StateActionTable& table() const { return probs_; }
    std::size_t num_states() const { return probs_.rows(); }
    std::size_t num_actions() const { return probs_.cols(); }

private:
    StateActionTable probs_;
};

/// State-action visitation probabilities q(s, a) of some policy.
class OccupancyMeasure {
public:
    OccupancyMeasure() = default;
    explicit OccupancyMeasure(StateActionTable q) : q_(std::move(q)) {}

    double operator()(std::size_t s, std::size_t a) const { return q_(s, a); }
    double marginal(std::size_t s) const;
    std::span<const double> row(std::size_t s) const { return q_.row(s); }
    const StateActionTable& table() const { return q_; }
    std::size_t num_states() const { return q_.rows(); }
    std::size_t num_actions() const { return q_.cols(); }

private:
    StateActionTable q_;
};

struct Step {
    std::size_t state;
    std::size_t action;
};

/// One episode path: exactly H (state, action) steps, one per layer.
struct Trajectory {
    std::vector<Step> steps;
    std::size_t final_state = 0;

    /// Index of the step taken at `state`, if the path visits it.
    std::optional<std::size_t> step_at(const LayeredMdp& mdp, std::size_t state) const;
    bool visited(const LayeredMdp& mdp, std::size_t state) const {
        return step_at(mdp, state).has_value();
    }
    bool visited(const LayeredMdp& mdp, std::size_t state, std::size_t action) const;
};

/// Exact forward dynamic program for q^pi.
OccupancyMeasure occupancy_of_policy(const LayeredMdp& mdp, const Policy& policy);

/// pi^q(a|s) = q(s,a)/q(s); states with q(s) = 0 get the uniform row.
Policy policy_of_occupancy(const OccupancyMeasure& q);

struct ValueAndQ {
    std::vector<double> value;  // per state, value[terminal] = 0
    StateActionTable q;
};

/// Backward dynamic program for V^pi(.; loss) and Q^pi(.,.; loss).
ValueAndQ value_and_q(const LayeredMdp& mdp, const Policy& policy, const LossTable& loss);

/// V^pi(s_0; loss).
double initial_value(const LayeredMdp& mdp, const Policy& policy, const LossTable& loss);

struct ReachResult {
    double value = 0.0;       // max over policies of q^pi(target)
    Policy policy;            // maximizer; uniform from the target's layer onward
    OccupancyMeasure occupancy;
};

ReachResult max_reach(const LayeredMdp& mdp, std::size_t target);

struct FixedPolicyResult {
    Policy policy;   // deterministic, lowest action index on ties
    double value = 0.0;
};

/// Minimizer of V^pi(s_0; cumulative_loss) over Markov policies.
FixedPolicyResult best_fixed_policy(const LayeredMdp& mdp, const LossTable& cumulative_loss);

/// Chooses the action at a state; may depend on anything the caller tracks.
using StepPolicy = std::function<std::size_t(std::size_t state, RandomSource& rng)>;

Trajectory sample_trajectory(const LayeredMdp& mdp, const StepPolicy& step_policy,
                             RandomSource& rng);
Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, RandomSource& rng);

/// max_h |sum_{s in S_h, a} q(s,a) - 1| over layers 0..H-1.
double layer_normalization_residual(const LayeredMdp& mdp, const OccupancyMeasure& q);
/// max_s |q(s) - sum q(s'',a'') P(s|s'',a'')| over layers 1..H-1.
double flow_residual(const LayeredMdp& mdp, const OccupancyMeasure& q);

} // namespace pbmdp
