#include "pbmdp/errors.hpp"
#include "pbmdp/harness.hpp"
#include "pbmdp/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

struct Common {
    std::string config_path;
    std::string out;
    std::size_t seeds = 0;
    std::size_t threads = 1;
};

pbmdp::ExperimentConfig load(const Common& common) {
    pbmdp::ExperimentConfig config = pbmdp::load_config(common.config_path);
    if (!common.out.empty()) config.output = common.out;
    if (common.seeds > 0) {
        config.seeds.clear();
        for (std::size_t i = 0; i < common.seeds; ++i) config.seeds.push_back(i);
    }
    return config;
}

int run_command(const Common& common) {
    const auto config = load(common);
    const auto traces = pbmdp::run_experiment(config, config.episodes, common.threads);
    const auto path = (std::filesystem::path(config.output) / "regret.csv").string();
    pbmdp::write_file_atomic(path, pbmdp::traces_to_csv(traces));
    std::vector<double> regrets;
    for (const auto& t : traces) regrets.push_back(t.final_regret());
    std::printf("%s: T=%zu seeds=%zu mean regret %.6g (stderr %.3g) -> %s\n",
                config.algorithm.c_str(), config.episodes, traces.size(), pbmdp::mean_of(regrets),
                pbmdp::stderr_of(regrets), path.c_str());
    return 0;
}

int sweep_command(const Common& common) {
    const auto config = load(common);
    const auto points = pbmdp::run_sweep(config, common.threads);
    nlohmann::json summary;
    summary["algorithm"] = config.algorithm;
    std::vector<std::size_t> grid;
    std::vector<std::vector<double>> regrets;
    for (const auto& p : points) {
        const auto name = "regret_T" + std::to_string(p.episodes) + ".csv";
        pbmdp::write_file_atomic((std::filesystem::path(config.output) / name).string(),
                                 pbmdp::traces_to_csv(p.traces));
        std::vector<double> r;
        for (const auto& t : p.traces) r.push_back(t.final_regret());
        grid.push_back(p.episodes);
        regrets.push_back(r);
        summary["points"].push_back(
            {{"T", p.episodes}, {"mean_regret", p.mean_regret}, {"stderr_regret", p.stderr_regret}});
        std::printf("T=%-8zu mean regret %.6g (stderr %.3g)\n", p.episodes, p.mean_regret,
                    p.stderr_regret);
    }
    try {
        const auto fit = pbmdp::slope_fit(grid, regrets);
        summary["slope"] = fit.slope;
        summary["slope_stderr"] = fit.stderr_slope;
        summary["intercept"] = fit.intercept;
        std::printf("log-log slope %.4f (stderr %.4f)\n", fit.slope, fit.stderr_slope);
    } catch (const std::exception& e) {
        summary["slope_error"] = e.what();
        std::printf("no slope fit: %s\n", e.what());
    }
    pbmdp::write_file_atomic((std::filesystem::path(config.output) / "summary.json").string(),
                             summary.dump(2) + "\n");
    return 0;
}

int verify_command() {
    const auto checks = pbmdp::run_lemma_suite();
    for (const auto& c : checks)
        std::printf("%s %s (worst %.3g, tol %.3g)%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.worst, c.tolerance, c.detail.empty() ? "" : ": ", c.detail.c_str());
    return pbmdp::all_passed(checks) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dueling-feedback learners on layered MDPs"};
    app.require_subcommand(1);
    Common common;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", common.out, "output directory (overrides the config)");
        sub->add_option("--seeds", common.seeds, "use seeds 0..N-1")->check(CLI::PositiveNumber);
        sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "run every seed at T and write regret.csv");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "run each T of T_grid and fit the regret slope");
    add_common(sweep);
    auto* verify = app.add_subcommand("verify", "brute-force checks on tiny instances");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_command(common);
        if (*sweep) return sweep_command(common);
        if (*verify) return verify_command();
    } catch (const pbmdp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pbmdp::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const pbmdp::StructuralError& e) {
        std::cerr << "structural error: " << e.what() << "\n";
        return 2;
    } catch (const pbmdp::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const pbmdp::EstimatorDomainError& e) {
        std::cerr << "estimator domain error: " << e.what() << "\n";
        return 3;
    } catch (const pbmdp::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
