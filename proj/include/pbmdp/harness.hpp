#pragma once

#include "pbmdp/learner.hpp"
#include "pbmdp/mdp.hpp"
#include "pbmdp/preference.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pbmdp {

struct MdpSpec {
    std::string generator = "uniform_layered";  // or "random_layered"
    std::size_t horizon = 3;
    std::size_t layer_width = 2;
    std::size_t num_arms = 4;
    std::uint64_t seed = 0;  // random_layered only
    /// JSON file with "num_arms", "layer_sizes" and a flat "kernel"; overrides the generator.
    std::optional<std::string> kernel_file;
};

struct EnvironmentSpec {
    std::string family = "pref_lb";  // pref_lb | loss_lb | fixed | switching
    /// Empty means "auto" (pref_lb and switching only).
    std::optional<double> epsilon;
    /// Planted arm (preference families) or action (loss_lb) per non-terminal
    /// state; drawn from `seed` when empty.
    std::vector<std::size_t> planted;
    std::optional<std::size_t> excluded_state;
    std::uint64_t seed = 0;
    double switch_probability = 0.1;
};

struct ParamSpec {
    bool automatic = true;
    std::optional<double> gamma;
    std::optional<double> eta;
    std::optional<double> delta;
    std::optional<double> c;
    std::optional<double> delta_prime;
};

struct ExperimentConfig {
    MdpSpec mdp;
    EnvironmentSpec environment;
    std::string algorithm = "global";  // global | po | po-unknown | uniform-baseline
    ParamSpec params;
    std::size_t episodes = 0;
    std::vector<std::size_t> episode_grid;
    std::vector<std::uint64_t> seeds;
    std::string output = "out";
    std::size_t log_every = 1;
};

/// Parses and validates a JSON config; throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

LayeredMdp build_mdp(const MdpSpec& spec);

/// Gap minimizing the preference lower bound at horizon T (capped at 1/20).
double auto_epsilon(const LayeredMdp& mdp, std::size_t episodes);

/// Environment for one run; `run_seed` drives its per-episode randomness.
std::unique_ptr<Environment> build_environment(const ExperimentConfig& config,
                                               const LayeredMdp& mdp, std::size_t episodes,
                                               std::uint64_t run_seed);

std::unique_ptr<Learner> build_learner(const ExperimentConfig& config, const LayeredMdp& mdp,
                                       std::size_t episodes);

struct TracePoint {
    std::size_t t = 0;
    double cum_expected_loss = 0.0;
    double comparator = 0.0;
    double regret = 0.0;
};

struct RegretTrace {
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    std::vector<TracePoint> points;
    /// Sum of losses along the sampled trajectories.
    double cum_realized_loss = 0.0;
    /// Sum over episodes of l_t.
    LossTable cumulative_loss;
    /// Comparator at T from best_fixed_policy on the cumulative table.
    double best_fixed_value = 0.0;
    double final_regret() const { return points.empty() ? 0.0 : points.back().regret; }
};

/// One seed of an experiment over `episodes` episodes. Points are logged
/// every `log_every` episodes and at T. The comparator is the best fixed
/// policy for the whole horizon, evaluated on each prefix by replaying the
/// environment.
RegretTrace run_seed(const ExperimentConfig& config, std::size_t episodes, std::uint64_t seed);

/// All seeds, parallel over `threads` workers; results in seed order.
std::vector<RegretTrace> run_experiment(const ExperimentConfig& config, std::size_t episodes,
                                        std::size_t threads);

struct CsvRow {
    std::uint64_t seed = 0;
    std::size_t t = 0;
    double cum_expected_loss = 0.0;
    double comparator = 0.0;
    double regret = 0.0;
};

inline constexpr const char* kCsvHeader =
    "seed,t,cum_expected_loss,comparator_value_at_t,regret_at_t";

/// Rows sorted by (seed, t), doubles printed with 17 significant digits.
std::string traces_to_csv(const std::vector<RegretTrace>& traces);
std::vector<CsvRow> parse_csv(const std::string& text);

/// Writes through a temporary sibling and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    std::vector<double> episodes;
    std::vector<double> mean_regret;
};

/// Least squares of log(mean regret) on log T. Needs >= 4 grid points with
/// >= 10 regrets each; throws NumericalError on a nonpositive mean.
SlopeFit slope_fit(const std::vector<std::size_t>& episodes,
                   const std::vector<std::vector<double>>& regrets);

struct SweepPoint {
    std::size_t episodes = 0;
    std::vector<RegretTrace> traces;
    double mean_regret = 0.0;
    double stderr_regret = 0.0;
};

/// Runs every T in the grid (or just T when the grid is empty).
std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, std::size_t threads);

double mean_of(const std::vector<double>& values);
/// Standard error of the mean (0 for fewer than two values).
double stderr_of(const std::vector<double>& values);

} // namespace pbmdp
