// Acceptance run: one PASS/FAIL line per criterion, followed by indented
// detail lines. Exits nonzero when any criterion fails.

#include "pbmdp/errors.hpp"
#include "pbmdp/harness.hpp"
#include "pbmdp/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace pbmdp;

namespace {

struct Verdict {
    bool passed = true;
    std::vector<std::string> details;

    void note(const std::string& line) { details.push_back(line); }
    void require(bool ok, const std::string& line) {
        passed = passed && ok;
        note(std::string(ok ? "ok   " : "bad  ") + line);
    }
};

std::string fmt(const char* pattern, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

void fold(Verdict& v, const std::vector<CheckResult>& checks, const std::string& prefix) {
    for (const auto& c : checks) {
        if (c.passed) continue;
        v.passed = false;
        v.note("bad  " + prefix + c.name + fmt(" (worst %.3g, tol %.3g)", c.worst, c.tolerance) +
               (c.detail.empty() ? "" : ": " + c.detail));
    }
}

Verdict over_suite(const std::function<std::vector<CheckResult>(const LemmaInstance&)>& check) {
    Verdict v;
    std::size_t total = 0;
    for (const auto& inst : lemma_suite()) {
        const auto checks = check(inst);
        total += checks.size();
        fold(v, checks, "");
    }
    v.note(fmt("%.0f checks over the enumeration suite", static_cast<double>(total)));
    return v;
}

ExperimentConfig preference_config(const std::string& algorithm, std::size_t seeds) {
    ExperimentConfig cfg;
    cfg.mdp.horizon = 3;
    cfg.mdp.layer_width = 2;
    cfg.mdp.num_arms = 4;
    cfg.environment.family = "pref_lb";
    cfg.environment.seed = 2024;
    cfg.algorithm = algorithm;
    cfg.params.automatic = true;
    for (std::size_t i = 0; i < seeds; ++i) cfg.seeds.push_back(i);
    cfg.log_every = 1u << 30;  // only T is logged
    return cfg;
}

struct GridRun {
    std::vector<std::size_t> grid;
    std::vector<std::vector<double>> regrets;
    std::vector<std::string> failures;
};

GridRun run_grid(const ExperimentConfig& cfg, const std::vector<std::size_t>& grid, Verdict& v) {
    GridRun out;
    for (std::size_t T : grid) {
        try {
            const auto traces = run_experiment(cfg, T, worker_count());
            std::vector<double> r;
            for (const auto& t : traces) r.push_back(t.final_regret());
            out.grid.push_back(T);
            out.regrets.push_back(r);
            v.note(cfg.algorithm + fmt(": T=%.0f mean regret %.1f (stderr %.1f)", double(T), mean_of(r), stderr_of(r)));
        } catch (const ParameterError& e) {
            out.failures.push_back(e.what());
            v.note(cfg.algorithm + fmt(": T=%.0f schedule rejected: ", double(T)) + e.what());
        }
    }
    return out;
}

double two_point_slope(const GridRun& run) {
    const std::size_t n = run.grid.size();
    return std::log(mean_of(run.regrets[n - 1]) / mean_of(run.regrets[n - 2])) /
           std::log(double(run.grid[n - 1]) / double(run.grid[n - 2]));
}

Verdict criterion_unbiasedness() { return over_suite(check_unbiasedness); }
Verdict criterion_q_lemmas() { return over_suite(check_q_lemmas); }
Verdict criterion_moments() { return over_suite(check_moments); }

Verdict criterion_ftrl() {
    Verdict v;
    fold(v, check_ftrl(50, 2024), "");
    v.note("50 random instances plus the single-layer softmax cases");
    return v;
}

Verdict criterion_occupancy() {
    return over_suite([](const LemmaInstance& inst) { return check_occupancy(inst, 100000, 7); });
}

Verdict criterion_unknown() {
    Verdict v;
    const auto checks = check_unknown_machinery(100, 500, 99);
    fold(v, checks, "");
    v.note(fmt("%.0f checks: sandwich over 100 runs x 500 episodes, greedy vs vertices, zero-width reduction",
               double(checks.size())));
    return v;
}

Verdict criterion_lower_bound_sanity() {
    Verdict v;
    ExperimentConfig cfg;
    cfg.mdp.horizon = 3;
    cfg.mdp.layer_width = 2;
    cfg.mdp.num_arms = 2;
    cfg.environment.family = "loss_lb";
    cfg.environment.epsilon = 0.1;
    cfg.environment.seed = 11;
    cfg.algorithm = "uniform-baseline";
    cfg.params.automatic = false;
    for (std::uint64_t s = 0; s < 50; ++s) cfg.seeds.push_back(s);
    cfg.log_every = 1u << 30;
    const std::size_t T = 20000;
    const auto traces = run_experiment(cfg, T, worker_count());
    std::vector<double> r;
    for (const auto& t : traces) r.push_back(t.final_regret());
    const double A = 4.0, H = 3.0;
    const double expected = 0.1 * (H - 1.0) * T * (1.0 - 1.0 / A);
    const double mean = mean_of(r), se = stderr_of(r);
    v.require(std::abs(mean - expected) <= 4.0 * se,
              fmt("mean regret %.2f, closed form %.2f, 4 sigma = %.2f", mean, expected, 4.0 * se));
    return v;
}

Verdict criterion_rates() {
    Verdict v;
    const std::vector<std::size_t> grid = {1u << 12, 1u << 13, 1u << 14, 1u << 15, 1u << 16};
    const std::size_t seeds = 20;

    const auto global = run_grid(preference_config("global", seeds), grid, v);
    if (global.failures.empty()) {
        const auto fit = slope_fit(global.grid, global.regrets);
        v.require(fit.slope >= 0.55 && fit.slope <= 0.80,
                  fmt("global: slope %.4f (stderr %.4f), accepted [0.55, 0.80]", fit.slope, fit.stderr_slope));
    } else {
        v.require(false, "global: automatic schedule rejected on part of the grid");
    }

    const auto po = run_grid(preference_config("po", seeds), grid, v);
    if (po.failures.empty()) {
        const auto fit = slope_fit(po.grid, po.regrets);
        v.require(fit.slope >= 0.55 && fit.slope <= 0.80,
                  fmt("po: slope %.4f (stderr %.4f), accepted [0.55, 0.80]", fit.slope, fit.stderr_slope));
    } else {
        v.require(false, fmt("po: automatic schedule rejected at %.0f of %.0f grid points", double(po.failures.size()),
                             double(grid.size())));
        if (po.grid.size() >= 2)
            v.note(fmt("po: slope over the two largest feasible points %.4f", two_point_slope(po)));
    }

    const std::vector<std::size_t> top = {grid[3], grid[4]};
    const auto unknown = run_grid(preference_config("po-unknown", seeds), top, v);
    if (unknown.failures.empty() && unknown.grid.size() == 2) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto it = std::find(po.grid.begin(), po.grid.end(), top[i]);
            if (it == po.grid.end()) {
                v.require(false, fmt("po-unknown: no po run at T=%.0f to compare with", double(top[i])));
                continue;
            }
            const double known = mean_of(po.regrets[it - po.grid.begin()]);
            const double unk = mean_of(unknown.regrets[i]);
            v.require(unk >= known, fmt("po-unknown: T=%.0f regret %.1f vs po %.1f", double(top[i]), unk, known));
        }
        const double slope = two_point_slope(unknown);
        v.require(slope >= 0.55 && slope <= 0.85, fmt("po-unknown: slope %.4f, accepted [0.55, 0.85]", slope));
    } else {
        v.require(false, "po-unknown: automatic schedule rejected");
    }
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict criterion_determinism() {
    Verdict v;
    const auto dir = std::filesystem::temp_directory_path() / "pbmdp_acceptance_determinism";
    std::filesystem::remove_all(dir);
    struct Case {
        const char* algorithm;
        const char* family;
    };
    for (const Case c : {Case{"global", "switching"}, Case{"po", "fixed"}, Case{"po-unknown", "pref_lb"},
                         Case{"uniform-baseline", "loss_lb"}}) {
        auto cfg = preference_config(c.algorithm, 4);
        cfg.environment.family = c.family;
        if (cfg.environment.family == "loss_lb") {
            cfg.environment.epsilon = 0.1;
        } else {
            cfg.environment.epsilon = 0.05;
        }
        cfg.log_every = 25;
        if (std::string(c.algorithm) == "global") {
            cfg.params = {false, 0.2, 0.1, {}, {}, {}};
        } else if (std::string(c.algorithm) != "uniform-baseline") {
            cfg.params = {false, 0.2, 0.01, 0.05, 2.0, {}};
        } else {
            cfg.params.automatic = false;
        }
        const std::size_t T = 1000;
        const auto a = dir / (std::string(c.algorithm) + "_a.csv");
        const auto b = dir / (std::string(c.algorithm) + "_b.csv");
        const auto p = dir / (std::string(c.algorithm) + "_parallel.csv");
        write_file_atomic(a.string(), traces_to_csv(run_experiment(cfg, T, 1)));
        write_file_atomic(b.string(), traces_to_csv(run_experiment(cfg, T, 1)));
        write_file_atomic(p.string(), traces_to_csv(run_experiment(cfg, T, 4)));
        const auto first = read_file(a);
        v.require(first == read_file(b) && first == read_file(p) && first.size() > 100,
                  std::string(c.algorithm) + " on " + c.family + fmt(": %.0f bytes identical across runs and 1/4 threads",
                                                                      double(first.size())));
    }
    std::filesystem::remove_all(dir);
    return v;
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    Verdict (*run)();
};

} // namespace

int main() {
    const Criterion criteria[] = {
        {1, "estimator unbiasedness by enumeration", 60, criterion_unbiasedness},
        {2, "Q-estimator expectation identities by enumeration", 120, criterion_q_lemmas},
        {3, "second-moment and bonus bounds", 120, criterion_moments},
        {4, "FTRL solver against the reference and softmax", 120, criterion_ftrl},
        {5, "occupancy and dynamic-programming invariants", 120, criterion_occupancy},
        {6, "unknown-transition machinery", 300, criterion_unknown},
        {7, "uniform learner regret on the loss lower-bound instance", 120, criterion_lower_bound_sanity},
        {8, "regret growth rates with automatic schedules", 1800, criterion_rates},
        {9, "byte-identical CSV output", 60, criterion_determinism},
    };
    bool all = true;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.passed = false;
            v.note(std::string("bad  exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool ok = v.passed && in_time;
        all = all && ok;
        std::printf("%s criterion %d: %s [%.1f s of %.0f s]\n", ok ? "PASS" : "FAIL", c.id, c.title, seconds,
                    c.budget_seconds);
        for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
        if (!in_time) std::printf("    bad  runtime budget exceeded\n");
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
