#include "pbmdp/verification.hpp"

#include "pbmdp/confidence.hpp"
#include "pbmdp/errors.hpp"
#include "pbmdp/global_learner.hpp"
#include "pbmdp/oracle.hpp"
#include "pbmdp/oreps.hpp"
#include "pbmdp/po_learner.hpp"
#include "pbmdp/po_unknown_learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace pbmdp {
namespace {

constexpr double kExact = 1e-9;
constexpr double kMass = 1e-12;

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[96];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

std::string at(std::size_t s, std::size_t a) {
    return "s=" + std::to_string(s) + " a=" + std::to_string(a);
}

/// Tracks the largest error or violation seen by a check.
class Tracker {
public:
    Tracker(std::string name, double tolerance) : name_(std::move(name)), tolerance_(tolerance) {}

    void equal(double got, double want, const std::string& where) {
        note(std::abs(got - want), where, got, want);
    }
    void at_most(double got, double bound, const std::string& where) {
        note(std::max(0.0, got - bound), where, got, bound);
    }
    void at_least(double got, double bound, const std::string& where) {
        note(std::max(0.0, bound - got), where, got, bound);
    }
    void fail(const std::string& why) {
        failed_ = true;
        where_ = why;
    }

    CheckResult result() const {
        CheckResult out;
        out.name = name_;
        out.worst = worst_;
        out.tolerance = tolerance_;
        out.passed = !failed_ && worst_ <= tolerance_;
        out.detail = where_.empty() ? "ok" : where_;
        return out;
    }

private:
    void note(double error, const std::string& where, double got, double want) {
        if (!(error <= worst_) || std::isnan(error)) {
            worst_ = std::isnan(error) ? std::numeric_limits<double>::infinity() : error;
            where_ = where + fmt(" got %.17g want %.17g", got, want);
        }
    }

    std::string name_;
    double tolerance_;
    double worst_ = 0.0;
    bool failed_ = false;
    std::string where_;
};

CheckResult mass_check(const std::string& name, const EnumerationStats& stats) {
    Tracker t(name + ": total probability", kMass);
    t.equal(stats.total_probability, 1.0, std::to_string(stats.atoms) + " atoms");
    return t.result();
}

void warm_up(Learner& learner, const LemmaInstance& instance, std::size_t episodes,
             std::uint64_t seed) {
    FixedPreferenceEnvironment env(instance.mdp, instance.pref);
    PhiloxSource lr(seed, StreamRole::learner);
    PhiloxSource tr(seed, StreamRole::environment_transitions);
    PhiloxSource fb(seed, StreamRole::environment_feedback);
    SimulatedWorld world(instance.mdp, env, tr, fb);
    for (std::size_t t = 0; t < episodes; ++t) learner.step(world, lr);
}

/// Runs one episode of `learner` with every random choice branched.
template <class Functional>
std::vector<double> enumerate_episode(const Learner& learner, const LemmaInstance& instance,
                                      Functional functional, EnumerationStats& stats) {
    FixedPreferenceEnvironment env(instance.mdp, instance.pref);
    return enumerate_expectation(
        [&](RandomSource& source) {
            SimulatedWorld world(instance.mdp, env, source, source);
            return functional(learner.run_episode(world, source));
        },
        &stats);
}

Policy random_policy(const LayeredMdp& mdp, std::uint64_t seed) {
    PhiloxSource rng(seed, StreamRole::instance, 7);
    auto table = StateActionTable::like(mdp);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        double total = 0.0;
        for (double& w : table.row(s)) total += (w = 0.05 + rng.uniform01());
        for (double& w : table.row(s)) w /= total;
    }
    return Policy(std::move(table));
}

LossTable random_loss(const LayeredMdp& mdp, double scale, PhiloxSource& rng) {
    auto loss = LossTable::like(mdp);
    for (double& v : loss.data()) v = scale * rng.uniform01();
    return loss;
}

/// Box around the true kernel, off-center, that still contains it.
ConfidenceSet widened_set(const LayeredMdp& mdp, std::uint64_t seed) {
    PhiloxSource rng(seed, StreamRole::instance, 9);
    std::vector<double> pbar = mdp.kernel();
    std::vector<double> width(pbar.size());
    for (std::size_t i = 0; i < pbar.size(); ++i) {
        const double shift = 0.1 * (2.0 * rng.uniform01() - 1.0);
        pbar[i] += shift;
        width[i] = std::abs(shift) + 0.05;
    }
    return ConfidenceSet(shape_only(mdp), std::move(pbar), std::move(width));
}

/// Conditional mean of lhat at the played pair on an explored state, times
/// gamma: (K/2)(1 - P(i,j))(1 + [i = j]). A single comparison cannot recover
/// l(s,(i,j)) given that (i,j) was played, so Q-estimates built from played
/// pairs are unbiased for this loss instead.
LossTable played_pair_loss(const LayeredMdp& mdp, const PreferenceModel& pref) {
    const std::size_t k = mdp.num_arms();
    auto out = LossTable::like(mdp);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
            const std::size_t i = left_arm(a, k);
            const std::size_t j = right_arm(a, k);
            out(s, a) = 0.5 * static_cast<double>(k) * (1.0 - pref(s, i, j)) * (i == j ? 2.0 : 1.0);
        }
    }
    return out;
}

} // namespace

bool all_passed(const std::vector<CheckResult>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<LemmaInstance> lemma_suite() {
    std::vector<LemmaInstance> out;
    const auto block = [](const LayeredMdp& mdp) {
        const auto matrix = block_preference_matrix(2, 0.05, 0);
        return PreferenceModel::constant(mdp.num_nonterminal(), 2, matrix);
    };
    {
        auto mdp = make_uniform_layered_mdp(2, 2, 2);
        auto pref = block(mdp);
        out.push_back({"h2-uniform-block", std::move(mdp), std::move(pref)});
    }
    {
        auto mdp = random_layered_mdp(2, 2, 2, 11);
        auto pref = random_preference_model(mdp.num_nonterminal(), 2, 12);
        out.push_back({"h2-random", std::move(mdp), std::move(pref)});
    }
    {
        auto mdp = random_layered_mdp(3, 2, 2, 21);
        auto pref = random_preference_model(mdp.num_nonterminal(), 2, 22);
        out.push_back({"h3-random", std::move(mdp), std::move(pref)});
    }
    {
        auto mdp = random_layered_mdp(3, 1, 2, 31);
        auto pref = block(mdp);
        out.push_back({"h3-chain-block", std::move(mdp), std::move(pref)});
    }
    return out;
}

std::vector<CheckResult> check_unbiasedness(const LemmaInstance& instance) {
    const LayeredMdp& mdp = instance.mdp;
    const std::size_t S = mdp.num_nonterminal();
    const std::size_t K = mdp.num_arms();
    const std::size_t A = mdp.num_actions();
    const LossTable loss = borda_loss_table(mdp, instance.pref);
    const std::string tag = instance.name + ": ";
    std::vector<CheckResult> out;

    // bhat under product arm sampling with unequal arm marginals.
    {
        Tracker t(tag + "E[bhat] = b", kExact);
        std::vector<double> alpha(K), beta(K);
        for (std::size_t i = 0; i < K; ++i) {
            alpha[i] = static_cast<double>(i + 1);
            beta[i] = static_cast<double>(K - i) + 0.5;
        }
        const auto normalize = [](std::vector<double>& v) {
            double total = 0.0;
            for (double x : v) total += x;
            for (double& x : v) x /= total;
        };
        normalize(alpha);
        normalize(beta);
        std::vector<double> row(A);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) row[encode_action(i, j, K)] = alpha[i] * beta[j];
        for (std::size_t s = 0; s < S; ++s) {
            EnumerationStats stats;
            const auto mean = enumerate_expectation(
                [&](RandomSource& source) {
                    EpisodeRecord record;
                    record.num_arms = K;
                    const std::size_t a = source.categorical(row);
                    const bool o = sample_feedback(instance.pref, s, left_arm(a, K), right_arm(a, K),
                                                   source);
                    record.trajectory.steps = {{s, a}};
                    record.feedback = {static_cast<std::uint8_t>(o)};
                    record.step_policy = {row};
                    std::vector<double> v(K);
                    for (std::size_t arm = 0; arm < K; ++arm)
                        v[arm] = borda_estimate(record, s, arm);
                    return v;
                },
                &stats);
            const auto b = borda_scores(instance.pref, s);
            for (std::size_t arm = 0; arm < K; ++arm) t.equal(mean[arm], b[arm], at(s, arm));
            t.equal(stats.total_probability, 1.0, "mass");
        }
        out.push_back(t.result());
    }

    // Global learner: btilde and lhat.
    {
        const double gamma = 0.3;
        GlobalLearner learner(mdp, {gamma, 0.5});
        warm_up(learner, instance, 8, 101);
        EnumerationStats stats;
        const auto mean = enumerate_episode(
            learner, instance,
            [&](const EpisodeOutcome& o) {
                std::vector<double> v(S * K + S * A, 0.0);
                if (o.record.explored && o.record.target) {
                    const auto rows = scaled_borda_rows(o.record, gamma, S,
                                                        learner.reach()[*o.record.target].value);
                    for (std::size_t k = 0; k < rows.size(); ++k)
                        for (std::size_t i = 0; i < K; ++i)
                            v[rows.state(k) * K + i] = rows.row_at(k)[i];
                }
                for (std::size_t k = 0; k < o.loss_estimate.size(); ++k)
                    for (std::size_t a = 0; a < A; ++a)
                        v[S * K + o.loss_estimate.state(k) * A + a] = o.loss_estimate.row_at(k)[a];
                return v;
            },
            stats);
        out.push_back(mass_check(tag + "global episode", stats));
        Tracker tb(tag + "global E[btilde] = b", kExact);
        Tracker tl(tag + "global E[lhat] = l", kExact);
        for (std::size_t s = 0; s < S; ++s) {
            const auto b = borda_scores(instance.pref, s);
            for (std::size_t i = 0; i < K; ++i) tb.equal(mean[s * K + i], b[i], at(s, i));
            for (std::size_t a = 0; a < A; ++a) tl.equal(mean[S * K + s * A + a], loss(s, a), at(s, a));
        }
        out.push_back(tb.result());
        out.push_back(tl.result());
    }

    // PO learners: E[lhat(s,a)] = q_mix(s) l(s,a).
    const auto po_lhat = [&](const Learner& learner, const Policy& softmax, double gamma,
                             const std::string& name) {
        const auto q = occupancy_of_policy(mdp, exploration_mixture(softmax, gamma));
        EnumerationStats stats;
        const auto mean = enumerate_episode(
            learner, instance,
            [&](const EpisodeOutcome& o) {
                auto table = StateActionTable::like(mdp);
                o.loss_estimate.add_into(table);
                return table.data();
            },
            stats);
        out.push_back(mass_check(tag + name + " episode", stats));
        Tracker t(tag + name + " E[lhat] = q(s) l", kExact);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a)
                t.equal(mean[s * A + a], q.marginal(s) * loss(s, a), at(s, a));
        out.push_back(t.result());
    };
    {
        const PoLearnerConfig cfg{0.2, 0.3, 0.1, 2.0};
        PoLearner learner(mdp, cfg);
        warm_up(learner, instance, 8, 102);
        po_lhat(learner, learner.softmax_policy(), cfg.gamma, "po");
    }
    {
        const PoUnknownConfig cfg{{0.2, 0.3, 0.1, 2.0}, 1000, 0.01};
        PoUnknownLearner learner(mdp, cfg);
        warm_up(learner, instance, 8, 103);
        po_lhat(learner, po_policy(learner.cumulative(), cfg.base.eta), cfg.base.gamma,
                "po-unknown");
    }
    return out;
}

std::vector<CheckResult> check_q_lemmas(const LemmaInstance& instance) {
    const LayeredMdp& mdp = instance.mdp;
    const std::size_t S = mdp.num_nonterminal();
    const std::size_t A = mdp.num_actions();
    const LossTable loss = borda_loss_table(mdp, instance.pref);
    const LossTable played = played_pair_loss(mdp, instance.pref);
    const std::string tag = instance.name + ": ";
    std::vector<CheckResult> out;

    // Q-estimate per pair, then V^{pi_t}(s0) in the last slot.
    const auto functional = [&](const EpisodeOutcome& o) {
        auto table = StateActionTable::like(mdp);
        o.q_estimate.add_into(table);
        std::vector<double> v = table.data();
        v.push_back(initial_value(mdp, o.executed, loss));
        return v;
    };

    for (const double delta : {0.0, 0.1}) {
        const std::string dtag = tag + fmt("delta=%g ", delta);
        const PoLearnerConfig cfg{0.2, 0.3, delta, 2.0};
        {
            PoLearner learner(mdp, cfg);
            warm_up(learner, instance, 8, 201);
            const Policy mixture = exploration_mixture(learner.softmax_policy(), cfg.gamma);
            const auto q = occupancy_of_policy(mdp, mixture);
            const auto vq = value_and_q(mdp, mixture, loss);
            EnumerationStats stats;
            const auto mean = enumerate_episode(learner, instance, functional, stats);
            out.push_back(mass_check(dtag + "po episode", stats));
            Tracker t(dtag + "po E[Qhat] = q/(q+delta) Q", kExact);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a)
                    t.equal(mean[s * A + a], q(s, a) / (q(s, a) + delta) * vq.q(s, a), at(s, a));
            out.push_back(t.result());
            const auto vp = value_and_q(mdp, mixture, played);
            Tracker tp(dtag + "po E[Qhat] = q/(q+delta) Q under played-pair loss", kExact);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a)
                    tp.equal(mean[s * A + a], q(s, a) / (q(s, a) + delta) * vp.q(s, a), at(s, a));
            out.push_back(tp.result());
            Tracker tv(dtag + "po E[V^pi_t] = V^pi_mix", kExact);
            tv.equal(mean.back(), vq.value[mdp.initial_state()], "s0");
            out.push_back(tv.result());
        }

        const std::vector<std::pair<std::string, ConfidenceSet>> sets = {
            {"vacuous", ConfidenceSet::vacuous(shape_only(mdp))},
            {"exact", ConfidenceSet::exact(mdp)},
            {"widened", widened_set(mdp, 202)},
        };
        for (const auto& [set_name, set] : sets) {
            const std::string stag = dtag + "po-unknown " + set_name + " ";
            Tracker t(stag + "E[Qhat] >= q/(qbar+delta) Q", kExact);
            Tracker te(stag + "E[Qhat] decomposition under played-pair loss", kExact);
            if (!set.contains(mdp)) {
                t.fail("true kernel is outside the set");
                out.push_back(t.result());
                continue;
            }
            const PoUnknownConfig ucfg{cfg, 1000, 0.01};
            PoUnknownLearner learner(mdp, ucfg, set);
            warm_up(learner, instance, 8, 203);
            const Policy mixture =
                exploration_mixture(po_policy(learner.cumulative(), cfg.eta), cfg.gamma);
            const auto q = occupancy_of_policy(mdp, mixture);
            const auto bounds = occupancy_bounds(set, mixture);
            const auto vq = value_and_q(mdp, mixture, loss);
            const auto vp = value_and_q(mdp, mixture, played);
            EnumerationStats stats;
            const auto mean = enumerate_episode(learner, instance, functional, stats);
            out.push_back(mass_check(stag + "episode", stats));
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t a = 0; a < A; ++a) {
                    const double upper = bounds.upper(s, a) + delta;
                    t.at_least(mean[s * A + a], q(s, a) / upper * vq.q(s, a), at(s, a));
                    const double exact =
                        q.marginal(s) / (bounds.upper.marginal(s) + delta) * played(s, a) +
                        q(s, a) / upper * (vp.q(s, a) - played(s, a));
                    te.equal(mean[s * A + a], exact, at(s, a));
                }
            }
            out.push_back(t.result());
            out.push_back(te.result());
        }
    }
    return out;
}

std::vector<CheckResult> check_moments(const LemmaInstance& instance) {
    const LayeredMdp& mdp = instance.mdp;
    const std::size_t S = mdp.num_nonterminal();
    const std::size_t K = mdp.num_arms();
    const std::size_t A = mdp.num_actions();
    const double H = static_cast<double>(mdp.horizon());
    const std::string tag = instance.name + ": ";
    std::vector<CheckResult> out;
    FixedPreferenceEnvironment env(mdp, instance.pref);

    for (const double gamma : {0.1, 0.5}) {
        const std::string gtag = tag + fmt("gamma=%g ", gamma);
        {
            GlobalLearner learner(mdp, {gamma, 0.5});
            warm_up(learner, instance, 8, 301);
            EnumerationStats stats;
            const auto mean = enumerate_episode(
                learner, instance,
                [&](const EpisodeOutcome& o) {
                    std::vector<double> v(S * K, 0.0);
                    if (o.record.explored && o.record.target) {
                        const auto rows = scaled_borda_rows(
                            o.record, gamma, S, learner.reach()[*o.record.target].value);
                        for (std::size_t k = 0; k < rows.size(); ++k)
                            for (std::size_t i = 0; i < K; ++i)
                                v[rows.state(k) * K + i] = rows.row_at(k)[i] * rows.row_at(k)[i];
                    }
                    return v;
                },
                stats);
            Tracker t(gtag + "global E[btilde^2] <= S K/(gamma r)", 0.0);
            for (std::size_t s = 0; s < S; ++s) {
                const double bound = static_cast<double>(S * K) / (gamma * learner.reach()[s].value);
                for (std::size_t i = 0; i < K; ++i) t.at_most(mean[s * K + i], bound, at(s, i));
            }
            out.push_back(t.result());
        }
        for (const double delta : {0.0, 0.1}) {
            const std::string dtag = gtag + fmt("delta=%g ", delta);
            const PoLearnerConfig cfg{0.2, gamma, delta, 2.0};
            PoLearner learner(mdp, cfg);
            warm_up(learner, instance, 8, 302);
            const auto q =
                occupancy_of_policy(mdp, exploration_mixture(learner.softmax_policy(), gamma));
            std::vector<double> second(S * A, 0.0);
            double max_bonus = 0.0;
            Tracker tm(dtag + "po M <= c H^2", 0.0);
            try {
                enumerate_atoms(
                    [&](RandomSource& source) {
                        SimulatedWorld world(mdp, env, source, source);
                        return learner.run_episode(world, source);
                    },
                    [&](double p, const EpisodeOutcome& o) {
                        for (const auto& e : o.q_estimate.entries)
                            second[e.state * A + e.action] += p * e.value * e.value;
                        for (double m : o.bonus.data()) max_bonus = std::max(max_bonus, m);
                    });
                tm.at_most(max_bonus, cfg.c * H * H, "max over atoms");
            } catch (const NumericalError& e) {
                tm.fail(e.what());
            }
            out.push_back(tm.result());
            Tracker t(dtag + "po E[Qhat^2] <= 4 A K H^2/((q+delta) gamma)", 0.0);
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a)
                    t.at_most(second[s * A + a],
                              4.0 * static_cast<double>(A * K) * H * H / ((q(s, a) + delta) * gamma),
                              at(s, a));
            out.push_back(t.result());
        }
    }
    return out;
}

std::vector<CheckResult> check_ftrl(std::size_t instances, std::uint64_t seed) {
    std::vector<CheckResult> out;
    Tracker objective("ftrl objective vs reference", 1e-8);
    Tracker feasible("ftrl polytope feasibility", 1e-10);
    PhiloxSource rng(seed, StreamRole::instance, 11);
    for (std::size_t n = 0; n < instances; ++n) {
        const std::size_t horizon = 2 + rng.uniform_index(3);
        const std::size_t width = 1 + rng.uniform_index(3);
        const std::size_t arms = 2 + rng.uniform_index(2);
        const LayeredMdp mdp = random_layered_mdp(horizon, width, arms, seed * 1000 + n, true);
        FtrlState state{random_loss(mdp, 20.0 * rng.uniform01(), rng),
                        std::exp(std::log(0.05) + rng.uniform01() * std::log(40.0))};
        const std::string where = "instance " + std::to_string(n);
        try {
            const FtrlResult fast = ftrl_update(mdp, state);
            const ReferenceResult ref = reference_update(mdp, state);
            objective.equal(ftrl_objective(fast.q, state), ftrl_objective(ref.q, state), where);
            feasible.at_most(flow_residual(mdp, fast.q), 0.0, where + " flow");
            feasible.at_most(layer_normalization_residual(mdp, fast.q), 0.0, where + " layers");
            for (double v : fast.q.table().data()) feasible.at_least(v, 0.0, where + " sign");
        } catch (const std::exception& e) {
            objective.fail(where + ": " + e.what());
        }
    }
    out.push_back(objective.result());
    out.push_back(feasible.result());

    Tracker softmax("ftrl single layer = softmax", 1e-10);
    for (std::size_t arms = 1; arms <= 3; ++arms) {
        const std::size_t A = arms * arms;
        const LayeredMdp mdp(arms, {1, 1}, std::vector<double>(A, 1.0));
        for (std::size_t rep = 0; rep < 5; ++rep) {
            FtrlState state{random_loss(mdp, 10.0, rng), 0.1 + 2.0 * rng.uniform01()};
            const FtrlResult fast = ftrl_update(mdp, state);
            double total = 0.0;
            for (std::size_t a = 0; a < A; ++a) total += std::exp(-state.eta * state.cumulative_loss(0, a));
            for (std::size_t a = 0; a < A; ++a)
                softmax.equal(fast.q(0, a), std::exp(-state.eta * state.cumulative_loss(0, a)) / total,
                              at(0, a));
        }
    }
    out.push_back(softmax.result());
    return out;
}

std::vector<CheckResult> check_occupancy(const LemmaInstance& instance, std::size_t samples,
                                         std::uint64_t seed) {
    const LayeredMdp& mdp = instance.mdp;
    const std::size_t S = mdp.num_nonterminal();
    const std::size_t A = mdp.num_actions();
    const std::string tag = instance.name + ": ";
    std::vector<CheckResult> out;
    const Policy policy = random_policy(mdp, seed);
    const auto q = occupancy_of_policy(mdp, policy);

    Tracker residual(tag + "flow and layer residuals", 1e-12);
    residual.at_most(flow_residual(mdp, q), 0.0, "flow");
    residual.at_most(layer_normalization_residual(mdp, q), 0.0, "layers");
    out.push_back(residual.result());

    {
        EnumerationStats stats;
        const auto mean = enumerate_expectation(
            [&](RandomSource& source) {
                const Trajectory path = sample_trajectory(mdp, policy, source);
                std::vector<double> v(S * A, 0.0);
                for (const auto& step : path.steps) v[step.state * A + step.action] = 1.0;
                return v;
            },
            &stats);
        Tracker t(tag + "E[visit] = occupancy", 1e-12);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) t.equal(mean[s * A + a], q(s, a), at(s, a));
        t.equal(stats.total_probability, 1.0, "mass");
        out.push_back(t.result());
    }
    {
        PhiloxSource rng(seed, StreamRole::environment_transitions);
        std::vector<double> counts(S * A, 0.0);
        for (std::size_t n = 0; n < samples; ++n)
            for (const auto& step : sample_trajectory(mdp, policy, rng).steps)
                counts[step.state * A + step.action] += 1.0;
        Tracker t(tag + "Monte Carlo occupancy within 4 sigma", 0.0);
        const double n = static_cast<double>(samples);
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t a = 0; a < A; ++a) {
                const double p = q(s, a);
                const double sigma = std::sqrt(p * (1.0 - p) / n);
                t.at_most(std::abs(counts[s * A + a] / n - p), 4.0 * sigma + 1e-12, at(s, a));
            }
        }
        out.push_back(t.result());
    }
    {
        Tracker t(tag + "max_reach = policy search", 1e-12);
        for (std::size_t target = 0; target < S; ++target) {
            const auto search = enumerate_policies(mdp, [&](const Policy& pi) {
                return occupancy_of_policy(mdp, pi).marginal(target);
            });
            t.equal(max_reach(mdp, target).value, search.value, "target " + std::to_string(target));
        }
        out.push_back(t.result());
    }
    {
        PhiloxSource rng(seed, StreamRole::instance, 13);
        auto cumulative = LossTable::like(mdp);
        for (int t = 0; t < 3; ++t) cumulative += random_loss(mdp, 1.0, rng);
        const auto search = enumerate_policies(
            mdp, [&](const Policy& pi) { return -initial_value(mdp, pi, cumulative); });
        Tracker t(tag + "best_fixed_policy = policy search", 1e-12);
        t.equal(best_fixed_policy(mdp, cumulative).value, -search.value, "value");
        out.push_back(t.result());
    }
    return out;
}

std::vector<CheckResult> check_unknown_machinery(std::size_t runs, std::size_t episodes,
                                                 std::uint64_t seed) {
    std::vector<CheckResult> out;
    {
        Tracker t("sandwich qlow <= q <= qbar under coverage", 1e-12);
        Tracker counts("counter consistency", 0.0);
        std::size_t covered = 0;
        std::size_t total = 0;
        for (std::size_t run = 0; run < runs; ++run) {
            const std::uint64_t run_seed = seed * 10000 + run;
            const LayeredMdp mdp = random_layered_mdp(3, 2, 2, run_seed);
            const auto pref = random_preference_model(mdp.num_nonterminal(), 2, run_seed);
            FixedPreferenceEnvironment env(mdp, pref);
            const double h = static_cast<double>(mdp.horizon());
            PoUnknownLearner learner(
                mdp, {{0.05, 0.3, 0.1, 2.0}, episodes, 1.0 / (h * h * h * static_cast<double>(episodes))});
            PhiloxSource lr(run_seed, StreamRole::learner);
            PhiloxSource tr(run_seed, StreamRole::environment_transitions);
            PhiloxSource fb(run_seed, StreamRole::environment_feedback);
            SimulatedWorld world(mdp, env, tr, fb);
            for (std::size_t ep = 0; ep < episodes; ++ep) {
                const bool inside = learner.confidence_set().contains(mdp);
                const EpisodeOutcome o = learner.run_episode(world, lr);
                ++total;
                if (inside) {
                    ++covered;
                    const auto q = occupancy_of_policy(mdp, o.mixture);
                    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
                        for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
                            const std::string where =
                                "run " + std::to_string(run) + " ep " + std::to_string(ep) + " " + at(s, a);
                            t.at_least(q(s, a), o.lower_occupancy(s, a), where);
                            t.at_most(q(s, a), o.upper_occupancy(s, a), where);
                        }
                    }
                }
                learner.update(o);
            }
            counts.at_most(learner.counters().count_mismatch(), 0.0, "run " + std::to_string(run));
        }
        auto r = t.result();
        r.detail += " (" + std::to_string(covered) + "/" + std::to_string(total) + " episodes covered)";
        if (covered == 0) r.passed = false;
        out.push_back(r);
        out.push_back(counts.result());
    }
    {
        Tracker t("extremal_transition = vertex enumeration", 1e-9);
        PhiloxSource rng(seed, StreamRole::instance, 17);
        for (std::size_t n = 0; n < 2000; ++n) {
            const std::size_t width = 1 + rng.uniform_index(6);
            std::vector<double> values(width), pbar(width), conf(width);
            double total = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
                values[j] = 2.0 * rng.uniform01() - 1.0;
                total += (pbar[j] = rng.uniform01());
                conf[j] = 0.4 * rng.uniform01();
            }
            for (double& p : pbar) p /= total;
            if (n % 5 == 0) std::fill(conf.begin(), conf.end(), 0.0);
            for (const bool maximize : {true, false}) {
                const auto p = extremal_transition(values, pbar, conf, maximize ? Extreme::max : Extreme::min);
                double greedy = 0.0, mass = 0.0;
                for (std::size_t j = 0; j < width; ++j) {
                    greedy += p[j] * values[j];
                    mass += p[j];
                    t.at_most(std::abs(p[j] - pbar[j]), conf[j] + 1e-12, "box case " + std::to_string(n));
                }
                t.equal(mass, 1.0, "mass case " + std::to_string(n));
                t.equal(greedy, brute_force_extremal_value(values, pbar, conf, maximize),
                        "case " + std::to_string(n));
            }
        }
        out.push_back(t.result());
    }
    {
        Tracker t("zero-width set reduces to known-transition estimators", 1e-9);
        for (std::size_t run = 0; run < 50; ++run) {
            const std::uint64_t run_seed = seed * 20000 + run;
            const LayeredMdp mdp = random_layered_mdp(3, 2, 2, run_seed);
            const auto pref = random_preference_model(mdp.num_nonterminal(), 2, run_seed);
            FixedPreferenceEnvironment env(mdp, pref);
            const PoLearnerConfig cfg{0.05, 0.3, 0.1, 2.0};
            PoLearner known(mdp, cfg);
            PoUnknownLearner unknown(mdp, {cfg, 100, 0.01}, ConfidenceSet::exact(mdp));
            const auto play = [&](const Learner& learner) {
                PhiloxSource lr(run_seed, StreamRole::learner);
                PhiloxSource tr(run_seed, StreamRole::environment_transitions);
                PhiloxSource fb(run_seed, StreamRole::environment_feedback);
                SimulatedWorld world(mdp, env, tr, fb);
                return learner.run_episode(world, lr);
            };
            const EpisodeOutcome a = play(known);
            const EpisodeOutcome b = play(unknown);
            const std::string where = "run " + std::to_string(run);
            const std::size_t A = mdp.num_actions();
            const auto& q = a.upper_occupancy;
            for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
                for (std::size_t x = 0; x < A; ++x) {
                    t.equal(b.upper_occupancy(s, x), q(s, x), where + " upper " + at(s, x));
                    t.equal(b.lower_occupancy(s, x), q(s, x), where + " lower " + at(s, x));
                    t.equal(b.executed(s, x), a.executed(s, x), where + " policy " + at(s, x));
                }
            }
            if (a.record.trajectory.steps.size() != b.record.trajectory.steps.size() ||
                a.q_estimate.entries.size() != b.q_estimate.entries.size()) {
                t.fail(where + ": episodes diverged");
                continue;
            }
            for (std::size_t h = 0; h < a.q_estimate.entries.size(); ++h) {
                const auto& ea = a.q_estimate.entries[h];
                const auto& eb = b.q_estimate.entries[h];
                if (ea.state != eb.state || ea.action != eb.action) {
                    t.fail(where + ": trajectories differ");
                    break;
                }
                const double lhat = a.loss_estimate.value(ea.state, ea.action);
                t.equal(lhat, b.loss_estimate.value(eb.state, eb.action), where + " lhat");
                t.equal(a.q_estimate.tail[h], b.q_estimate.tail[h], where + " tail");
                // Only the immediate-term denominator differs.
                const double marginal = q.marginal(ea.state);
                const double known_scale = q(ea.state, ea.action) /
                                           (q(ea.state, ea.action) + cfg.delta) /
                                           (marginal / static_cast<double>(A));
                const double unknown_scale = static_cast<double>(A) / (marginal + cfg.delta);
                t.equal(ea.value - eb.value, lhat * (known_scale - unknown_scale), where + " Qhat");
            }
        }
        out.push_back(t.result());
    }
    return out;
}

std::vector<CheckResult> run_lemma_suite() {
    std::vector<CheckResult> out;
    const auto append = [&](std::vector<CheckResult> part) {
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    };
    for (const auto& instance : lemma_suite()) {
        append(check_unbiasedness(instance));
        append(check_q_lemmas(instance));
        append(check_moments(instance));
        append(check_occupancy(instance, 100000, 7));
    }
    append(check_ftrl(50, 2024));
    append(check_unknown_machinery(100, 500, 99));
    return out;
}

} // namespace pbmdp
