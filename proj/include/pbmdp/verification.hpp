#pragma once

#include "pbmdp/mdp.hpp"
#include "pbmdp/preference.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pbmdp {

/// Outcome of one brute-force check. `worst` is the largest error (equality
/// checks) or the largest violation (inequality checks, 0 when none).
struct CheckResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

bool all_passed(const std::vector<CheckResult>& checks);

/// A tiny instance whose single-episode law is small enough to enumerate.
struct LemmaInstance {
    std::string name;
    LayeredMdp mdp;
    PreferenceModel pref;
};

/// Fixed suite: H in {2, 3}, S' <= 2, K = 2, uniform and random kernels,
/// block and random preferences.
std::vector<LemmaInstance> lemma_suite();

/// E[bhat] = b under product arm sampling; E[btilde] = b and E[lhat] = l
/// for the global learner; E[lhat(s,a)] = q(s) l(s,a) for the PO learners.
std::vector<CheckResult> check_unbiasedness(const LemmaInstance& instance);

/// Known transitions: E[Qhat] = q/(q+delta) Q^{pi mix}. Unknown transitions
/// with the true kernel inside the set: E[Qhat] >= q/(qbar+delta) Q^{pi mix}.
/// Also E over coins of V^{pi_t} = V^{pi mix}. delta in {0, 0.1}.
std::vector<CheckResult> check_q_lemmas(const LemmaInstance& instance);

/// E[btilde^2] <= S K / (gamma r), E[Qhat^2] <= 4 A K H^2 / ((q+delta) gamma)
/// and M <= c H^2 on every atom, for gamma in {0.1, 0.5}.
std::vector<CheckResult> check_moments(const LemmaInstance& instance);

/// Newton FTRL against the mirror-descent reference on random instances,
/// and the single-layer softmax closed form.
std::vector<CheckResult> check_ftrl(std::size_t instances, std::uint64_t seed);

/// Flow and normalization residuals, enumeration and Monte Carlo agreement
/// of occupancy, and max_reach / best_fixed_policy against policy search.
std::vector<CheckResult> check_occupancy(const LemmaInstance& instance, std::size_t samples,
                                         std::uint64_t seed);

/// Occupancy sandwich along learner runs, greedy extremal transitions against
/// vertex enumeration, and the zero-width reduction to the known-transition
/// estimators.
std::vector<CheckResult> check_unknown_machinery(std::size_t runs, std::size_t episodes,
                                                 std::uint64_t seed);

/// Every check above on the default suite, as run by `pbmdp verify`.
std::vector<CheckResult> run_lemma_suite();

} // namespace pbmdp
