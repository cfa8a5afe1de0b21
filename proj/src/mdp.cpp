#include "pbmdp/mdp.hpp"

#include "pbmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pbmdp {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_shape(const LayeredMdp& mdp, const StateActionTable& table, const char* what) {
    if (table.rows() != mdp.num_nonterminal() || table.cols() != mdp.num_actions()) {
        throw StructuralError(std::string(what) + ": table is " + std::to_string(table.rows()) +
                              "x" + std::to_string(table.cols()) + ", MDP needs " +
                              std::to_string(mdp.num_nonterminal()) + "x" +
                              std::to_string(mdp.num_actions()));
    }
}

} // namespace

LayeredMdp::LayeredMdp(std::size_t num_arms, std::vector<std::size_t> layer_sizes,
                       std::vector<double> kernel)
    : num_arms_(num_arms), layer_sizes_(std::move(layer_sizes)), kernel_(std::move(kernel)) {
    if (num_arms_ == 0) throw StructuralError("LayeredMdp: need at least one arm");
    if (layer_sizes_.size() < 2) throw StructuralError("LayeredMdp: need H >= 1");
    if (layer_sizes_.front() != 1 || layer_sizes_.back() != 1)
        throw StructuralError("LayeredMdp: first and last layers must be singletons");

    std::size_t begin = 0;
    for (std::size_t h = 0; h < layer_sizes_.size(); ++h) {
        if (layer_sizes_[h] == 0) throw StructuralError("LayeredMdp: empty layer");
        layer_begin_.push_back(begin);
        for (std::size_t j = 0; j < layer_sizes_[h]; ++j) layer_of_.push_back(h);
        begin += layer_sizes_[h];
    }

    const std::size_t actions = num_actions();
    std::size_t offset = 0;
    for (std::size_t s = 0; s + 1 < layer_of_.size(); ++s) {
        state_offset_.push_back(offset);
        offset += actions * layer_sizes_[layer_of_[s] + 1];
    }
    if (kernel_.size() != offset) {
        throw StructuralError("LayeredMdp: kernel has " + std::to_string(kernel_.size()) +
                              " entries, expected " + std::to_string(offset));
    }
    for (std::size_t s = 0; s < num_nonterminal(); ++s) {
        for (std::size_t a = 0; a < actions; ++a) {
            double total = 0.0;
            for (double p : next_row(s, a)) {
                if (!(p >= 0.0 && p <= 1.0))
                    throw StructuralError("LayeredMdp: transition probability outside [0,1]");
                total += p;
            }
            if (std::abs(total - 1.0) > kStochasticTol) {
                throw StructuralError("LayeredMdp: row (" + std::to_string(s) + "," +
                                      std::to_string(a) + ") sums to " + std::to_string(total));
            }
        }
    }
}

std::size_t LayeredMdp::row_offset(std::size_t state, std::size_t action) const {
    return state_offset_.at(state) + action * layer_sizes_[layer_of_[state] + 1];
}

std::span<const double> LayeredMdp::next_row(std::size_t state, std::size_t action) const {
    return {kernel_.data() + row_offset(state, action), layer_sizes_[layer_of_[state] + 1]};
}

double LayeredMdp::transition(std::size_t state, std::size_t action, std::size_t next) const {
    const std::size_t h = layer_of(state);
    if (layer_of(next) != h + 1) return 0.0;
    return next_row(state, action)[next - layer_begin_[h + 1]];
}

LayeredMdp LayeredMdp::with_kernel(std::vector<double> kernel) const {
    return LayeredMdp(num_arms_, layer_sizes_, std::move(kernel));
}

StateActionTable& StateActionTable::operator+=(const StateActionTable& other) {
    if (!same_shape(other)) throw StructuralError("StateActionTable: shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

StateActionTable& StateActionTable::operator-=(const StateActionTable& other) {
    if (!same_shape(other)) throw StructuralError("StateActionTable: shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Policy::Policy(StateActionTable probabilities) : probs_(std::move(probabilities)) {
    for (std::size_t s = 0; s < probs_.rows(); ++s) {
        double total = 0.0;
        for (double p : probs_.row(s)) {
            if (!(p >= 0.0)) throw StructuralError("Policy: negative or NaN probability");
            total += p;
        }
        if (std::abs(total - 1.0) > kStochasticTol)
            throw StructuralError("Policy: row " + std::to_string(s) + " sums to " +
                                  std::to_string(total));
    }
}

Policy Policy::uniform(const LayeredMdp& mdp) {
    return Policy(StateActionTable::like(mdp, 1.0 / static_cast<double>(mdp.num_actions())));
}

Policy Policy::deterministic(const LayeredMdp& mdp, std::span<const std::size_t> actions) {
    if (actions.size() != mdp.num_nonterminal())
        throw StructuralError("Policy::deterministic: one action per non-terminal state");
    auto table = StateActionTable::like(mdp);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] >= mdp.num_actions()) throw StructuralError("Policy::deterministic: bad action");
        table(s, actions[s]) = 1.0;
    }
    return Policy(std::move(table));
}

double OccupancyMeasure::marginal(std::size_t s) const {
    double total = 0.0;
    for (double v : q_.row(s)) total += v;
    return total;
}

std::optional<std::size_t> Trajectory::step_at(const LayeredMdp& mdp, std::size_t state) const {
    if (state >= mdp.num_nonterminal()) return std::nullopt;
    const std::size_t h = mdp.layer_of(state);
    if (h < steps.size() && steps[h].state == state) return h;
    return std::nullopt;
}

bool Trajectory::visited(const LayeredMdp& mdp, std::size_t state, std::size_t action) const {
    const auto h = step_at(mdp, state);
    return h && steps[*h].action == action;
}

OccupancyMeasure occupancy_of_policy(const LayeredMdp& mdp, const Policy& policy) {
    check_shape(mdp, policy.table(), "occupancy_of_policy");
    const std::size_t actions = mdp.num_actions();
    std::vector<double> reach(mdp.num_states(), 0.0);
    reach[mdp.initial_state()] = 1.0;
    auto q = StateActionTable::like(mdp);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        for (std::size_t a = 0; a < actions; ++a) {
            const double mass = reach[s] * policy(s, a);
            q(s, a) = mass;
            if (mass == 0.0) continue;
            const auto row = mdp.next_row(s, a);
            for (std::size_t j = 0; j < row.size(); ++j) reach[next_begin + j] += mass * row[j];
        }
    }
    return OccupancyMeasure(std::move(q));
}

Policy policy_of_occupancy(const OccupancyMeasure& q) {
    StateActionTable probs(q.num_states(), q.num_actions());
    const double uniform = 1.0 / static_cast<double>(q.num_actions());
    for (std::size_t s = 0; s < q.num_states(); ++s) {
        const double total = q.marginal(s);
        auto row = probs.row(s);
        if (total > 0.0) {
            for (std::size_t a = 0; a < row.size(); ++a) row[a] = q(s, a) / total;
        } else {
            std::fill(row.begin(), row.end(), uniform);
        }
    }
    return Policy(std::move(probs));
}

ValueAndQ value_and_q(const LayeredMdp& mdp, const Policy& policy, const LossTable& loss) {
    check_shape(mdp, policy.table(), "value_and_q (policy)");
    check_shape(mdp, loss, "value_and_q (loss)");
    ValueAndQ out{std::vector<double>(mdp.num_states(), 0.0), StateActionTable::like(mdp)};
    for (std::size_t s = mdp.num_nonterminal(); s-- > 0;) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        double v = 0.0;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.next_row(s, a);
            double cont = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) cont += row[j] * out.value[next_begin + j];
            const double qsa = loss(s, a) + cont;
            out.q(s, a) = qsa;
            v += policy(s, a) * qsa;
        }
        out.value[s] = v;
    }
    return out;
}

double initial_value(const LayeredMdp& mdp, const Policy& policy, const LossTable& loss) {
    return value_and_q(mdp, policy, loss).value[mdp.initial_state()];
}

ReachResult max_reach(const LayeredMdp& mdp, std::size_t target) {
    if (target >= mdp.num_nonterminal())
        throw StructuralError("max_reach: target must be a non-terminal state");
    const std::size_t target_layer = mdp.layer_of(target);
    const std::size_t actions = mdp.num_actions();

    std::vector<double> v(mdp.num_states(), 0.0);
    v[target] = 1.0;
    auto probs = StateActionTable::like(mdp, 1.0 / static_cast<double>(actions));
    const std::size_t first_after = mdp.layer_begin(target_layer);
    for (std::size_t s = first_after; s-- > 0;) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        double best = -1.0;
        std::size_t best_action = 0;
        for (std::size_t a = 0; a < actions; ++a) {
            const auto row = mdp.next_row(s, a);
            double value = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) value += row[j] * v[next_begin + j];
            if (value > best) {
                best = value;
                best_action = a;
            }
        }
        v[s] = best;
        auto row = probs.row(s);
        std::fill(row.begin(), row.end(), 0.0);
        row[best_action] = 1.0;
    }

    ReachResult out;
    out.value = v[mdp.initial_state()];
    out.policy = Policy(std::move(probs));
    out.occupancy = occupancy_of_policy(mdp, out.policy);
    return out;
}

FixedPolicyResult best_fixed_policy(const LayeredMdp& mdp, const LossTable& cumulative_loss) {
    check_shape(mdp, cumulative_loss, "best_fixed_policy");
    std::vector<double> v(mdp.num_states(), 0.0);
    std::vector<std::size_t> choice(mdp.num_nonterminal(), 0);
    for (std::size_t s = mdp.num_nonterminal(); s-- > 0;) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.next_row(s, a);
            double value = cumulative_loss(s, a);
            for (std::size_t j = 0; j < row.size(); ++j) value += row[j] * v[next_begin + j];
            if (value < best) {
                best = value;
                choice[s] = a;
            }
        }
        v[s] = best;
    }
    return {Policy::deterministic(mdp, choice), v[mdp.initial_state()]};
}

Trajectory sample_trajectory(const LayeredMdp& mdp, const StepPolicy& step_policy,
                             RandomSource& rng) {
    Trajectory path;
    path.steps.reserve(mdp.horizon());
    std::size_t state = mdp.initial_state();
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        const std::size_t action = step_policy(state, rng);
        path.steps.push_back({state, action});
        const std::size_t next_begin = mdp.layer_begin(h + 1);
        state = next_begin + rng.categorical(mdp.next_row(state, action));
    }
    path.final_state = state;
    return path;
}

Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, RandomSource& rng) {
    check_shape(mdp, policy.table(), "sample_trajectory");
    return sample_trajectory(
        mdp, [&policy](std::size_t s, RandomSource& r) { return r.categorical(policy.row(s)); },
        rng);
}

double layer_normalization_residual(const LayeredMdp& mdp, const OccupancyMeasure& q) {
    double worst = 0.0;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        double total = 0.0;
        for (std::size_t j = 0; j < mdp.layer_size(h); ++j) total += q.marginal(mdp.layer_begin(h) + j);
        worst = std::max(worst, std::abs(total - 1.0));
    }
    return worst;
}

double flow_residual(const LayeredMdp& mdp, const OccupancyMeasure& q) {
    std::vector<double> inflow(mdp.num_states(), 0.0);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.next_row(s, a);
            for (std::size_t j = 0; j < row.size(); ++j) inflow[next_begin + j] += q(s, a) * row[j];
        }
    }
    double worst = 0.0;
    for (std::size_t s = 1; s < mdp.num_nonterminal(); ++s)
        worst = std::max(worst, std::abs(q.marginal(s) - inflow[s]));
    return worst;
}

} // namespace pbmdp
