#include "pbmdp/oreps.hpp"

#include "pbmdp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pbmdp {

namespace {

constexpr double kResidualTol = 1e-13;
constexpr double kGapTol = 1e-8;
constexpr double kExpCeiling = 700.0;
constexpr std::size_t kNewtonBudget = 200;

void check_state(const LayeredMdp& mdp, const FtrlState& state) {
    if (!(state.eta > 0.0) || !std::isfinite(state.eta))
        throw ParameterError("ftrl: eta must be positive and finite");
    if (state.cumulative_loss.rows() != mdp.num_nonterminal() ||
        state.cumulative_loss.cols() != mdp.num_actions())
        throw StructuralError("ftrl: cumulative loss table does not match the MDP");
    for (double v : state.cumulative_loss.data())
        if (!std::isfinite(v)) throw ParameterError("ftrl: cumulative loss must be finite");
}

// Per-layer minimum subtracted; the argmin is unchanged because every layer
// carries unit mass.
LossTable shifted_loss(const LayeredMdp& mdp, const LossTable& loss) {
    LossTable out = loss;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < mdp.layer_size(h); ++j)
            for (double v : loss.row(mdp.layer_begin(h) + j)) lo = std::min(lo, v);
        for (std::size_t j = 0; j < mdp.layer_size(h); ++j)
            for (double& v : out.row(mdp.layer_begin(h) + j)) v -= lo;
    }
    return out;
}

// Residual r(t) = q(t) - inflow(t) - [t = s_0] for every non-terminal state.
std::vector<double> flow_residuals(const LayeredMdp& mdp, const StateActionTable& q) {
    std::vector<double> r(mdp.num_states(), 0.0);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            r[s] += q(s, a);
            const auto row = mdp.next_row(s, a);
            for (std::size_t j = 0; j < row.size(); ++j) r[next_begin + j] -= q(s, a) * row[j];
        }
    }
    r[mdp.initial_state()] -= 1.0;
    r.pop_back();
    return r;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

class DualProblem {
public:
    DualProblem(const LayeredMdp& mdp, const LossTable& shifted, double eta,
                const std::vector<bool>& reachable)
        : mdp_(mdp), loss_(shifted), eta_(eta), reachable_(reachable) {
        for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
            if (reachable[s]) {
                index_.push_back(variables_.size());
                variables_.push_back(s);
            } else {
                index_.push_back(kNone);
            }
        }
    }

    std::size_t size() const { return variables_.size(); }

    // Fills q from u (full per-state vector); returns false on exponent overflow.
    bool occupancy(const std::vector<double>& u, StateActionTable& q) const {
        for (std::size_t s = 0; s < mdp_.num_nonterminal(); ++s) {
            const std::size_t next_begin = mdp_.layer_begin(mdp_.layer_of(s) + 1);
            for (std::size_t a = 0; a < mdp_.num_actions(); ++a) {
                if (!reachable_[s]) {
                    q(s, a) = 0.0;
                    continue;
                }
                const auto row = mdp_.next_row(s, a);
                double z = -1.0 - eta_ * loss_(s, a) - u[s];
                for (std::size_t j = 0; j < row.size(); ++j)
                    if (row[j] != 0.0) z += row[j] * u[next_begin + j];
                if (z > kExpCeiling) return false;
                q(s, a) = std::exp(z);
            }
        }
        return true;
    }

    double dual_value(const std::vector<double>& u, const StateActionTable& q) const {
        double total = u[mdp_.initial_state()];
        for (double v : q.data()) total += v;
        return total;
    }

    Eigen::VectorXd gradient(const std::vector<double>& residual) const {
        Eigen::VectorXd g(size());
        for (std::size_t k = 0; k < size(); ++k) g[k] = -residual[variables_[k]];
        return g;
    }

    Eigen::MatrixXd hessian(const StateActionTable& q) const {
        const std::size_t n = size();
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
        std::vector<std::pair<std::size_t, double>> c;
        for (std::size_t s = 0; s < mdp_.num_nonterminal(); ++s) {
            if (!reachable_[s]) continue;
            const std::size_t next_begin = mdp_.layer_begin(mdp_.layer_of(s) + 1);
            for (std::size_t a = 0; a < mdp_.num_actions(); ++a) {
                c.clear();
                c.emplace_back(index_[s], -1.0);
                const auto row = mdp_.next_row(s, a);
                for (std::size_t j = 0; j < row.size(); ++j) {
                    const std::size_t t = next_begin + j;
                    if (row[j] != 0.0 && t < mdp_.num_nonterminal()) c.emplace_back(index_[t], row[j]);
                }
                const double w = q(s, a);
                for (const auto& [i, ci] : c)
                    for (const auto& [j, cj] : c) hess(i, j) += w * ci * cj;
            }
        }
        return hess;
    }

    void apply_step(const std::vector<double>& u, const Eigen::VectorXd& d, double step,
                    std::vector<double>& out) const {
        out = u;
        for (std::size_t k = 0; k < size(); ++k) out[variables_[k]] += step * d[k];
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    const LayeredMdp& mdp_;
    const LossTable& loss_;
    double eta_;
    const std::vector<bool>& reachable_;
    std::vector<std::size_t> variables_;
    std::vector<std::size_t> index_;
};

struct NewtonOutcome {
    bool converged = false;
    StateActionTable q;
    std::vector<double> u;
    std::size_t iterations = 0;
    double residual = 0.0;
};

NewtonOutcome newton_solve(const LayeredMdp& mdp, const LossTable& shifted, double eta,
                           const std::vector<bool>& reachable, std::vector<double> u) {
    DualProblem dual(mdp, shifted, eta, reachable);
    NewtonOutcome out;
    out.q = StateActionTable::like(mdp);
    if (!dual.occupancy(u, out.q)) {
        std::fill(u.begin(), u.end(), 0.0);
        if (!dual.occupancy(u, out.q)) return out;
    }
    double value = dual.dual_value(u, out.q);
    StateActionTable trial_q = out.q;
    std::vector<double> trial_u;

    for (std::size_t iter = 0; iter < kNewtonBudget; ++iter) {
        const auto residual = flow_residuals(mdp, out.q);
        out.residual = max_abs(residual);
        out.iterations = iter;
        if (out.residual <= kResidualTol) {
            out.converged = true;
            break;
        }
        const Eigen::VectorXd g = dual.gradient(residual);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(dual.hessian(out.q));
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::VectorXd d = ldlt.solve(-g);
        const double slope = g.dot(d);
        if (!(slope < 0.0)) break;

        double step = 1.0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k, step *= 0.5) {
            dual.apply_step(u, d, step, trial_u);
            if (!dual.occupancy(trial_u, trial_q)) continue;
            const double trial_value = dual.dual_value(trial_u, trial_q);
            // Accept when Armijo holds or when the decrease is below rounding
            // level but the residual still improves.
            if (trial_value <= value + 1e-4 * step * slope ||
                (trial_value <= value + 1e-15 * std::abs(value) &&
                 max_abs(flow_residuals(mdp, trial_q)) < out.residual)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        u = trial_u;
        out.q = trial_q;
        value = dual.dual_value(u, out.q);
    }
    if (!out.converged) {
        out.residual = max_abs(flow_residuals(mdp, out.q));
        out.converged = out.residual <= kResidualTol;
    }
    out.u = std::move(u);
    return out;
}

} // namespace

std::vector<bool> structurally_reachable(const LayeredMdp& mdp) {
    std::vector<bool> reach(mdp.num_states(), false);
    reach[mdp.initial_state()] = true;
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        if (!reach[s]) continue;
        const std::size_t next_begin = mdp.layer_begin(mdp.layer_of(s) + 1);
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.next_row(s, a);
            for (std::size_t j = 0; j < row.size(); ++j)
                if (row[j] > 0.0) reach[next_begin + j] = true;
        }
    }
    return reach;
}

double ftrl_objective(const OccupancyMeasure& q, const FtrlState& state) {
    double linear = 0.0;
    double entropy = 0.0;
    const auto& qd = q.table().data();
    const auto& ld = state.cumulative_loss.data();
    for (std::size_t i = 0; i < qd.size(); ++i) {
        linear += qd[i] * ld[i];
        if (qd[i] > 0.0) entropy += qd[i] * std::log(qd[i]);
    }
    return linear + entropy / state.eta;
}

FtrlResult ftrl_update(const LayeredMdp& mdp, const FtrlState& state,
                       const std::vector<double>* warm_start) {
    check_state(mdp, state);
    const auto reachable = structurally_reachable(mdp);
    const LossTable shifted = shifted_loss(mdp, state.cumulative_loss);

    std::vector<double> u0(mdp.num_states(), 0.0);
    if (warm_start && warm_start->size() == u0.size()) u0 = *warm_start;
    auto newton = newton_solve(mdp, shifted, state.eta, reachable, u0);
    if (!newton.converged && warm_start)
        newton = newton_solve(mdp, shifted, state.eta, reachable,
                              std::vector<double>(mdp.num_states(), 0.0));

    FtrlResult out;
    if (newton.converged) {
        // Gap of the shifted problem in units of the objective: |u . r| / eta.
        const auto residual = flow_residuals(mdp, newton.q);
        double dot = 0.0;
        for (std::size_t s = 0; s < residual.size(); ++s) dot += newton.u[s] * residual[s];
        out.q = OccupancyMeasure(std::move(newton.q));
        out.duality_gap = std::abs(dot) / state.eta;
        out.max_residual = max_abs(residual);
        out.potentials = std::move(newton.u);
        out.iterations = newton.iterations;
        const double scale = std::max(1.0, std::abs(ftrl_objective(out.q, state)));
        if (out.duality_gap <= kGapTol * scale) return out;
    }

    auto reference = reference_update(mdp, state);
    out.q = std::move(reference.q);
    out.potentials.assign(mdp.num_states(), 0.0);
    out.iterations = reference.iterations;
    out.max_residual = reference.max_residual;
    out.duality_gap = std::numeric_limits<double>::quiet_NaN();
    out.used_reference = true;
    return out;
}

OccupancyMeasure kl_projection(const LayeredMdp& mdp, const StateActionTable& y,
                               double tolerance, std::size_t max_sweeps) {
    const auto reachable = structurally_reachable(mdp);
    StateActionTable q = y;
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s)
        if (!reachable[s])
            for (double& v : q.row(s)) v = 0.0;

    // Members of constraint t: its own actions (coefficient 1) and every
    // upstream pair (coefficient -P(t|s,a)).
    struct Member {
        std::size_t s, a;
        double c;
    };
    std::vector<std::vector<Member>> members(mdp.num_nonterminal());
    for (std::size_t t = 0; t < mdp.num_nonterminal(); ++t) {
        if (!reachable[t]) continue;
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) members[t].push_back({t, a, 1.0});
        if (t == mdp.initial_state()) continue;
        const std::size_t h = mdp.layer_of(t);
        for (std::size_t j = 0; j < mdp.layer_size(h - 1); ++j) {
            const std::size_t s = mdp.layer_begin(h - 1) + j;
            if (!reachable[s]) continue;
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
                const double p = mdp.transition(s, a, t);
                if (p > 0.0) members[t].push_back({s, a, -p});
            }
        }
    }

    auto constraint = [&](std::size_t t, double lambda) {
        double f = (t == mdp.initial_state()) ? -1.0 : 0.0;
        double df = 0.0;
        for (const auto& m : members[t]) {
            const double v = q(m.s, m.a) * std::exp(lambda * m.c);
            f += m.c * v;
            df += m.c * m.c * v;
        }
        return std::pair{f, df};
    };

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        for (std::size_t t = 0; t < mdp.num_nonterminal(); ++t) {
            if (!reachable[t]) continue;
            // f is increasing in lambda; bracket the root, then safeguarded Newton.
            double lo = -1.0, hi = 1.0;
            while (constraint(t, lo).first > 0.0) lo *= 2.0;
            while (constraint(t, hi).first < 0.0) hi *= 2.0;
            double lambda = 0.0;
            for (int k = 0; k < 200; ++k) {
                const auto [f, df] = constraint(t, lambda);
                if (f == 0.0) break;
                if (f > 0.0) hi = lambda; else lo = lambda;
                double next = lambda - f / df;
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
                if (std::abs(next - lambda) <= 1e-17 * std::max(1.0, std::abs(lambda))) {
                    lambda = next;
                    break;
                }
                lambda = next;
            }
            for (const auto& m : members[t]) q(m.s, m.a) *= std::exp(lambda * m.c);
        }
        if (max_abs(flow_residuals(mdp, q)) <= tolerance) return OccupancyMeasure(std::move(q));
    }
    const double residual = max_abs(flow_residuals(mdp, q));
    if (residual <= 1e-12) return OccupancyMeasure(std::move(q));
    throw NumericalError("kl_projection: residual " + std::to_string(residual) +
                         " after sweep budget");
}

ReferenceResult reference_update(const LayeredMdp& mdp, const FtrlState& state,
                                 std::size_t max_iterations) {
    check_state(mdp, state);
    const LossTable shifted = shifted_loss(mdp, state.cumulative_loss);
    const double eta = state.eta;

    ReferenceResult out;
    OccupancyMeasure q = kl_projection(mdp, StateActionTable::like(mdp, 1.0));
    out.objective_history.push_back(ftrl_objective(q, state));
    for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
        // Mirror step with rate eta/2 on the gradient L + (log q + 1)/eta.
        auto y = StateActionTable::like(mdp);
        for (std::size_t i = 0; i < y.data().size(); ++i) {
            const double qi = q.table().data()[i];
            y.data()[i] = qi > 0.0
                              ? std::exp(0.5 * std::log(qi) - 0.5 * eta * shifted.data()[i] - 0.5)
                              : 0.0;
        }
        OccupancyMeasure next = kl_projection(mdp, y);
        double change = 0.0;
        for (std::size_t i = 0; i < y.data().size(); ++i) {
            const double a = next.table().data()[i];
            const double b = q.table().data()[i];
            if (a > 0.0 && b > 0.0) change = std::max(change, std::abs(std::log(a / b)));
        }
        q = std::move(next);
        out.objective_history.push_back(ftrl_objective(q, state));
        out.iterations = iter;
        if (change <= 1e-10) {
            out.max_residual = max_abs(flow_residuals(mdp, q.table()));
            out.q = std::move(q);
            return out;
        }
    }
    throw NumericalError("reference_update: no convergence within " +
                         std::to_string(max_iterations) + " iterations");
}

} // namespace pbmdp
