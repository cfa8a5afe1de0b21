#include "pbmdp/errors.hpp"
#include "pbmdp/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pbmdp;

namespace {

const char* kBase = R"({
  "mdp": {"generator": "uniform_layered", "H": 3, "S_prime": 2, "K": 4},
  "environment": {"family": "pref_lb", "epsilon": 0.05, "seed": 3},
  "algorithm": "global",
  "params": {"gamma": 0.2, "eta": 0.1},
  "T": 200, "seeds": [0, 1, 2], "log_every": 50
})";

std::string with(const std::string& from, const std::string& to) {
    std::string s = kBase;
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

} // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(kBase);
    CHECK(cfg.episodes == 200);
    CHECK(cfg.seeds.size() == 3);
    CHECK_FALSE(cfg.params.automatic);
    CHECK(*cfg.params.gamma == 0.2);
    CHECK(*cfg.environment.epsilon == 0.05);

    CHECK_THROWS_AS(parse_config(with("\"T\": 200", "\"T\": 0")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("\"seeds\": [0, 1, 2]", "\"seeds\": []")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("\"log_every\"", "\"log_evry\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("\"eta\": 0.1", "\"delta\": 0.1")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("\"global\"", "\"nonsense\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with("\"pref_lb\"", "\"loss_lb\"")), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

    const auto grid = parse_config(with("\"T\": 200", "\"T_grid\": [64, 256, 128]"));
    CHECK(grid.episodes == 256);
    const auto counted = parse_config(with("\"seeds\": [0, 1, 2]", "\"seeds\": 4"));
    CHECK(counted.seeds.back() == 3);
    const auto automatic = parse_config(with(R"("params": {"gamma": 0.2, "eta": 0.1})", R"("params": {"mode": "auto"})"));
    CHECK(automatic.params.automatic);
}

TEST_CASE("automatic epsilon is capped and shrinks with T") {
    const auto mdp = build_mdp(parse_config(kBase).mdp);
    CHECK(auto_epsilon(mdp, 1) == 0.05);
    const double a = auto_epsilon(mdp, 1 << 16), b = auto_epsilon(mdp, 1 << 19);
    CHECK(a < 0.05);
    CHECK(std::abs(b / a - 0.5) < 1e-12);
}

TEST_CASE("regret trace bookkeeping") {
    const auto cfg = parse_config(kBase);
    const auto trace = run_seed(cfg, cfg.episodes, 7);
    REQUIRE(trace.points.size() == 4);
    CHECK(trace.points.back().t == 200);
    for (const auto& p : trace.points) CHECK(p.regret == doctest::Approx(p.cum_expected_loss - p.comparator));
    CHECK(std::abs(trace.points.back().comparator - trace.best_fixed_value) < 1e-8);
    CHECK_THROWS_AS(run_seed(cfg, 0, 7), ConfigError);
}

TEST_CASE("a single episode cannot beat the best fixed policy") {
    for (const char* algorithm : {"\"global\"", "\"uniform-baseline\""}) {
        auto text = with("\"global\"", algorithm);
        if (std::string(algorithm) == "\"uniform-baseline\"") {
            const auto cut = text.find("\"params\"");
            text.erase(cut, text.find('\n', cut) - cut + 1);
        }
        const auto cfg = parse_config(text);
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            CHECK(run_seed(cfg, 1, seed).final_regret() >= -1e-10);
    }
}

TEST_CASE("csv round trip and determinism across thread counts") {
    const auto cfg = parse_config(kBase);
    const auto serial = traces_to_csv(run_experiment(cfg, cfg.episodes, 1));
    const auto parallel = traces_to_csv(run_experiment(cfg, cfg.episodes, 3));
    CHECK(serial == parallel);
    const auto rows = parse_csv(serial);
    REQUIRE(rows.size() == 12);
    CHECK(rows.front().seed == 0);
    CHECK(rows[4].seed == 1);
    const auto traces = run_experiment(cfg, cfg.episodes, 1);
    CHECK(rows[7].regret == traces[1].points[3].regret);  // 17 digits round-trip exactly
    CHECK_THROWS_AS(parse_csv("bad header\n"), ConfigError);
}

TEST_CASE("atomic file write") {
    const auto dir = std::filesystem::temp_directory_path() / "pbmdp_harness_test";
    const auto path = (dir / "nested" / "file.csv").string();
    write_file_atomic(path, "a\n");
    write_file_atomic(path, "b\n");
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    CHECK(s.str() == "b\n");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("slope fit recovers synthetic power laws") {
    const std::vector<std::size_t> grid = {1000, 2000, 4000, 8000, 16000};
    for (double slope : {2.0 / 3.0, 1.0}) {
        std::vector<std::vector<double>> regrets;
        for (auto T : grid) regrets.push_back(std::vector<double>(10, 3.0 * std::pow(double(T), slope)));
        const auto fit = slope_fit(grid, regrets);
        CHECK(std::abs(fit.slope - slope) < 1e-9);
        CHECK(std::abs(fit.intercept - std::log(3.0)) < 1e-8);
        CHECK(fit.stderr_slope < 1e-9);
    }
    std::vector<std::vector<double>> few(5, std::vector<double>(3, 1.0));
    CHECK_THROWS_AS(slope_fit(grid, few), ParameterError);
    std::vector<std::vector<double>> negative(5, std::vector<double>(10, -1.0));
    CHECK_THROWS_AS(slope_fit(grid, negative), NumericalError);
}

TEST_CASE("every family and learner runs") {
    for (const char* family : {"\"fixed\"", "\"switching\""}) {
        for (const char* algorithm : {"\"global\"", "\"po\"", "\"po-unknown\""}) {
            auto text = with("\"pref_lb\"", family);
            const auto pos = text.find("\"global\"");
            text.replace(pos, 8, algorithm);
            if (std::string(algorithm) != "\"global\"")
                text.replace(text.find("\"eta\": 0.1"), 10, "\"eta\": 0.01, \"delta\": 0.05");
            const auto cfg = parse_config(text);
            const auto trace = run_seed(cfg, 100, 1);
            CHECK(std::isfinite(trace.final_regret()));
        }
    }
    const auto loss = parse_config(R"({"environment": {"family": "loss_lb", "epsilon": 0.1},
        "algorithm": "uniform-baseline", "T": 50})");
    CHECK(std::isfinite(run_seed(loss, 50, 0).final_regret()));
}
