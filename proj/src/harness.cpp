#include "pbmdp/harness.hpp"

#include "pbmdp/errors.hpp"
#include "pbmdp/global_learner.hpp"
#include "pbmdp/po_learner.hpp"
#include "pbmdp/po_unknown_learner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace pbmdp {
namespace {

using nlohmann::json;

void reject_unknown(const json& object, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : object.items())
        if (!keys.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

const json& require_object(const json& parent, const char* key, const std::string& where) {
    const auto it = parent.find(key);
    if (it == parent.end() || !it->is_object())
        throw ConfigError(where + ": \"" + key + "\" must be an object");
    return *it;
}

std::size_t read_count(const json& object, const char* key, const std::string& where) {
    const auto& v = object.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + ": \"" + key + "\" must be a nonnegative integer");
    return v.get<std::size_t>();
}

double read_number(const json& object, const char* key, const std::string& where) {
    const auto& v = object.at(key);
    if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

template <class T, class Read>
void optional_field(const json& object, const char* key, T& target, Read read) {
    if (object.contains(key)) target = read(object, key);
}

MdpSpec parse_mdp(const json& j) {
    const std::string where = "mdp";
    reject_unknown(j, {"generator", "H", "S_prime", "K", "seed", "kernel_file"}, where);
    MdpSpec spec;
    if (j.contains("generator")) {
        if (!j["generator"].is_string()) throw ConfigError("mdp: \"generator\" must be a string");
        spec.generator = j["generator"].get<std::string>();
    }
    if (spec.generator != "uniform_layered" && spec.generator != "random_layered")
        throw ConfigError("mdp: unknown generator \"" + spec.generator + "\"");
    optional_field(j, "H", spec.horizon, [&](const json& o, const char* k) { return read_count(o, k, where); });
    optional_field(j, "S_prime", spec.layer_width, [&](const json& o, const char* k) { return read_count(o, k, where); });
    optional_field(j, "K", spec.num_arms, [&](const json& o, const char* k) { return read_count(o, k, where); });
    optional_field(j, "seed", spec.seed, [&](const json& o, const char* k) { return static_cast<std::uint64_t>(read_count(o, k, where)); });
    if (j.contains("kernel_file")) {
        if (!j["kernel_file"].is_string()) throw ConfigError("mdp: \"kernel_file\" must be a string");
        spec.kernel_file = j["kernel_file"].get<std::string>();
    }
    return spec;
}

EnvironmentSpec parse_environment(const json& j) {
    const std::string where = "environment";
    reject_unknown(j, {"family", "epsilon", "planted", "excluded_state", "seed", "switch_probability"},
                   where);
    EnvironmentSpec spec;
    if (j.contains("family")) {
        if (!j["family"].is_string()) throw ConfigError("environment: \"family\" must be a string");
        spec.family = j["family"].get<std::string>();
    }
    static const std::set<std::string> families = {"pref_lb", "loss_lb", "fixed", "switching"};
    if (!families.count(spec.family))
        throw ConfigError("environment: unknown family \"" + spec.family + "\"");
    if (j.contains("epsilon")) {
        const auto& e = j["epsilon"];
        if (e.is_string() && e.get<std::string>() == "auto") {
            spec.epsilon.reset();
        } else if (e.is_number()) {
            spec.epsilon = e.get<double>();
        } else {
            throw ConfigError("environment: \"epsilon\" must be a number or \"auto\"");
        }
    }
    if (j.contains("planted")) {
        const auto& p = j["planted"];
        if (!p.is_array()) throw ConfigError("environment: \"planted\" must be an array");
        for (const auto& v : p) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError("environment: planted entries must be nonnegative integers");
            spec.planted.push_back(v.get<std::size_t>());
        }
    }
    if (j.contains("excluded_state")) spec.excluded_state = read_count(j, "excluded_state", where);
    optional_field(j, "seed", spec.seed, [&](const json& o, const char* k) { return static_cast<std::uint64_t>(read_count(o, k, where)); });
    optional_field(j, "switch_probability", spec.switch_probability, [&](const json& o, const char* k) { return read_number(o, k, where); });
    if (!(spec.switch_probability >= 0.0 && spec.switch_probability <= 1.0))
        throw ConfigError("environment: switch_probability must lie in [0, 1]");
    if (!spec.epsilon && spec.family == "loss_lb")
        throw ConfigError("environment: loss_lb has no automatic epsilon");
    return spec;
}

ParamSpec parse_params(const json& j, const std::string& algorithm) {
    const std::string where = "params";
    reject_unknown(j, {"mode", "gamma", "eta", "delta", "c", "delta_prime"}, where);
    ParamSpec spec;
    const bool has_mode = j.contains("mode");
    if (has_mode) {
        if (!j["mode"].is_string()) throw ConfigError("params: \"mode\" must be a string");
        const auto mode = j["mode"].get<std::string>();
        if (mode != "auto" && mode != "explicit")
            throw ConfigError("params: mode must be \"auto\" or \"explicit\"");
        spec.automatic = mode == "auto";
    } else {
        spec.automatic = j.empty();
    }
    const auto read = [&](const char* key, std::optional<double>& target) {
        if (j.contains(key)) target = read_number(j, key, where);
    };
    read("gamma", spec.gamma);
    read("eta", spec.eta);
    read("delta", spec.delta);
    read("c", spec.c);
    read("delta_prime", spec.delta_prime);
    if (spec.automatic) {
        if (spec.gamma || spec.eta || spec.delta || spec.c || spec.delta_prime)
            throw ConfigError("params: explicit values given with mode \"auto\"");
        return spec;
    }
    const auto need = [&](const std::optional<double>& v, const char* key) {
        if (!v) throw ConfigError("params: algorithm " + algorithm + " needs \"" + key + "\"");
    };
    const auto forbid = [&](const std::optional<double>& v, const char* key) {
        if (v) throw ConfigError("params: \"" + std::string(key) + "\" is not a parameter of " + algorithm);
    };
    if (algorithm == "uniform-baseline") {
        forbid(spec.gamma, "gamma");
        forbid(spec.eta, "eta");
        forbid(spec.delta, "delta");
        forbid(spec.c, "c");
        forbid(spec.delta_prime, "delta_prime");
    } else if (algorithm == "global") {
        need(spec.gamma, "gamma");
        need(spec.eta, "eta");
        forbid(spec.delta, "delta");
        forbid(spec.c, "c");
        forbid(spec.delta_prime, "delta_prime");
    } else {
        need(spec.gamma, "gamma");
        need(spec.eta, "eta");
        need(spec.delta, "delta");
        if (algorithm == "po") forbid(spec.delta_prime, "delta_prime");
    }
    return spec;
}

std::vector<double> read_doubles(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_array()) throw ConfigError(where + ": \"" + key + "\" must be an array");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" entries must be numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

LayeredMdp load_kernel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("kernel_file: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("kernel_file: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("kernel_file: top level must be an object");
    reject_unknown(j, {"num_arms", "layer_sizes", "kernel"}, "kernel_file");
    const std::size_t arms = read_count(j, "num_arms", "kernel_file");
    std::vector<std::size_t> layers;
    for (double v : read_doubles(j, "layer_sizes", "kernel_file")) {
        if (v < 1 || v != std::floor(v)) throw ConfigError("kernel_file: layer sizes must be positive integers");
        layers.push_back(static_cast<std::size_t>(v));
    }
    return LayeredMdp(arms, std::move(layers), read_doubles(j, "kernel", "kernel_file"));
}

bool uses_loss_feedback(const ExperimentConfig& config) {
    return config.environment.family == "loss_lb";
}

HardInstanceParams hard_params(const EnvironmentSpec& spec, const LayeredMdp& mdp, double epsilon,
                               bool good_arms_only, std::uint64_t planted_seed) {
    HardInstanceParams params;
    params.epsilon = epsilon;
    params.planted = spec.planted.empty() ? draw_planted(mdp, good_arms_only, planted_seed)
                                          : spec.planted;
    params.excluded_state = spec.excluded_state;
    return params;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, {"mdp", "environment", "algorithm", "params", "T", "T_grid", "seeds", "output",
                       "log_every"},
                   "config");
    ExperimentConfig config;
    try {
        if (j.contains("mdp")) config.mdp = parse_mdp(require_object(j, "mdp", "config"));
        if (j.contains("environment"))
            config.environment = parse_environment(require_object(j, "environment", "config"));
        if (j.contains("algorithm")) {
            if (!j["algorithm"].is_string()) throw ConfigError("config: \"algorithm\" must be a string");
            config.algorithm = j["algorithm"].get<std::string>();
        }
        static const std::set<std::string> algorithms = {"global", "po", "po-unknown",
                                                         "uniform-baseline"};
        if (!algorithms.count(config.algorithm))
            throw ConfigError("config: unknown algorithm \"" + config.algorithm + "\"");
        config.params = j.contains("params")
                            ? parse_params(require_object(j, "params", "config"), config.algorithm)
                            : ParamSpec{};
        if (j.contains("T_grid")) {
            if (!j["T_grid"].is_array()) throw ConfigError("config: \"T_grid\" must be an array");
            for (const auto& v : j["T_grid"]) {
                if (!v.is_number_integer() || v.get<long long>() < 1)
                    throw ConfigError("config: T_grid entries must be positive integers");
                config.episode_grid.push_back(v.get<std::size_t>());
            }
        }
        if (j.contains("T")) {
            config.episodes = read_count(j, "T", "config");
        } else if (!config.episode_grid.empty()) {
            config.episodes = *std::max_element(config.episode_grid.begin(), config.episode_grid.end());
        }
        if (config.episodes < 1) throw ConfigError("config: T must be at least 1");
        if (j.contains("seeds")) {
            const auto& s = j["seeds"];
            if (s.is_number_integer()) {
                const auto n = s.get<long long>();
                for (long long i = 0; i < n; ++i) config.seeds.push_back(static_cast<std::uint64_t>(i));
            } else if (s.is_array()) {
                for (const auto& v : s) {
                    if (!v.is_number_integer() || v.get<long long>() < 0)
                        throw ConfigError("config: seeds must be nonnegative integers");
                    config.seeds.push_back(v.get<std::uint64_t>());
                }
            } else {
                throw ConfigError("config: \"seeds\" must be an array or a count");
            }
        } else {
            config.seeds = {0};
        }
        if (config.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
        if (j.contains("output")) {
            if (!j["output"].is_string()) throw ConfigError("config: \"output\" must be a string");
            config.output = j["output"].get<std::string>();
        }
        if (j.contains("log_every")) config.log_every = read_count(j, "log_every", "config");
        if (config.log_every < 1) throw ConfigError("config: log_every must be at least 1");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (uses_loss_feedback(config) && config.algorithm != "uniform-baseline")
        throw ConfigError("config: loss_lb instances only support the uniform-baseline learner");
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

LayeredMdp build_mdp(const MdpSpec& spec) {
    if (spec.kernel_file) return load_kernel_file(*spec.kernel_file);
    if (spec.generator == "random_layered")
        return random_layered_mdp(spec.horizon, spec.layer_width, spec.num_arms, spec.seed);
    return make_uniform_layered_mdp(spec.horizon, spec.layer_width, spec.num_arms);
}

double auto_epsilon(const LayeredMdp& mdp, std::size_t episodes) {
    const double ratio = static_cast<double>(mdp.horizon()) * static_cast<double>(episodes) /
                         (static_cast<double>(mdp.num_states()) * static_cast<double>(mdp.num_arms()));
    return std::min(0.05, 0.25 / (std::sqrt(60.0) * std::cbrt(ratio)));
}

std::unique_ptr<Environment> build_environment(const ExperimentConfig& config,
                                               const LayeredMdp& mdp, std::size_t episodes,
                                               std::uint64_t run_seed) {
    const EnvironmentSpec& spec = config.environment;
    const double epsilon = spec.epsilon ? *spec.epsilon : auto_epsilon(mdp, episodes);
    if (spec.family == "loss_lb")
        return make_loss_lb_instance(hard_params(spec, mdp, epsilon, false, spec.seed), mdp, run_seed);
    if (spec.family == "fixed")
        return std::make_unique<FixedPreferenceEnvironment>(
            mdp, random_preference_model(mdp.num_nonterminal(), mdp.num_arms(), spec.seed));
    const PreferenceModel base = pref_lb_model(mdp, hard_params(spec, mdp, epsilon, true, spec.seed));
    if (spec.family == "pref_lb") return std::make_unique<FixedPreferenceEnvironment>(mdp, base);
    HardInstanceParams other = hard_params(spec, mdp, epsilon, true, spec.seed);
    other.planted = draw_planted(mdp, true, spec.seed + 1);
    return std::make_unique<SwitchingPreferenceEnvironment>(mdp, base, pref_lb_model(mdp, other),
                                                            spec.switch_probability, run_seed);
}

std::unique_ptr<Learner> build_learner(const ExperimentConfig& config, const LayeredMdp& mdp,
                                       std::size_t episodes) {
    const ParamSpec& p = config.params;
    const std::size_t H = mdp.horizon();
    const std::size_t S = mdp.num_states();
    const std::size_t K = mdp.num_arms();
    if (config.algorithm == "uniform-baseline")
        return std::make_unique<UniformLearner>(
            mdp, uses_loss_feedback(config) ? FeedbackKind::loss : FeedbackKind::preference);
    if (config.algorithm == "global") {
        const GlobalLearnerConfig cfg =
            p.automatic ? auto_global_params(H, S, K, episodes) : GlobalLearnerConfig{*p.gamma, *p.eta};
        return std::make_unique<GlobalLearner>(mdp, cfg);
    }
    if (config.algorithm == "po") {
        const PoLearnerConfig cfg = p.automatic ? auto_po_params(H, S, K, episodes)
                                                : PoLearnerConfig{*p.eta, *p.gamma, *p.delta, p.c.value_or(2.0)};
        return std::make_unique<PoLearner>(mdp, cfg);
    }
    PoUnknownConfig cfg;
    if (p.automatic) {
        cfg = auto_po_unknown_params(H, S, K, episodes);
    } else {
        const double h = static_cast<double>(H);
        cfg.base = PoLearnerConfig{*p.eta, *p.gamma, *p.delta, p.c.value_or(2.0)};
        cfg.episodes = episodes;
        cfg.delta_prime = p.delta_prime.value_or(1.0 / (h * h * h * static_cast<double>(episodes)));
    }
    return std::make_unique<PoUnknownLearner>(mdp, cfg);
}

RegretTrace run_seed(const ExperimentConfig& config, std::size_t episodes, std::uint64_t seed) {
    if (episodes < 1) throw ConfigError("run: T must be at least 1");
    const LayeredMdp mdp = build_mdp(config.mdp);
    const auto env = build_environment(config, mdp, episodes, seed);
    const auto replay = env->restarted();
    const auto learner = build_learner(config, mdp, episodes);
    PhiloxSource learner_rng(seed, StreamRole::learner);
    PhiloxSource transitions(seed, StreamRole::environment_transitions);
    PhiloxSource feedback(seed, StreamRole::environment_feedback);
    SimulatedWorld world(mdp, *env, transitions, feedback);

    RegretTrace trace;
    trace.seed = seed;
    trace.episodes = episodes;
    trace.cumulative_loss = LossTable::like(mdp);
    double cumulative = 0.0;
    for (std::size_t t = 1; t <= episodes; ++t) {
        env->begin_episode(t);
        const LossTable& loss = env->loss_table();
        const EpisodeOutcome outcome = learner->step(world, learner_rng);
        cumulative += initial_value(mdp, outcome.executed, loss);
        for (const auto& step : outcome.record.trajectory.steps)
            trace.cum_realized_loss += loss(step.state, step.action);
        trace.cumulative_loss += loss;
        if (t % config.log_every == 0 || t == episodes) trace.points.push_back({t, cumulative, 0.0, 0.0});
    }

    const FixedPolicyResult best = best_fixed_policy(mdp, trace.cumulative_loss);
    trace.best_fixed_value = best.value;
    double comparator = 0.0;
    std::size_t next = 0;
    for (std::size_t t = 1; t <= episodes; ++t) {
        replay->begin_episode(t);
        comparator += initial_value(mdp, best.policy, replay->loss_table());
        if (next < trace.points.size() && trace.points[next].t == t) {
            trace.points[next].comparator = comparator;
            trace.points[next].regret = trace.points[next].cum_expected_loss - comparator;
            ++next;
        }
    }
    return trace;
}

std::vector<RegretTrace> run_experiment(const ExperimentConfig& config, std::size_t episodes,
                                        std::size_t threads) {
    const std::size_t n = config.seeds.size();
    std::vector<RegretTrace> traces(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                traces[i] = run_seed(config, episodes, config.seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return traces;
}

std::string traces_to_csv(const std::vector<RegretTrace>& traces) {
    std::vector<CsvRow> rows;
    for (const auto& trace : traces)
        for (const auto& p : trace.points)
            rows.push_back({trace.seed, p.t, p.cum_expected_loss, p.comparator, p.regret});
    std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
        return a.seed != b.seed ? a.seed < b.seed : a.t < b.t;
    });
    std::string out = std::string(kCsvHeader) + "\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%" PRIu64 ",%zu,%.17g,%.17g,%.17g\n", r.seed, r.t,
                      r.cum_expected_loss, r.comparator, r.regret);
        out += line;
    }
    return out;
}

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw ConfigError("csv: missing or unexpected header");
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CsvRow r;
        unsigned long long seed = 0;
        std::size_t t = 0;
        if (std::sscanf(line.c_str(), "%llu,%zu,%lf,%lf,%lf", &seed, &t, &r.cum_expected_loss,
                        &r.comparator, &r.regret) != 5)
            throw ConfigError("csv: malformed row \"" + line + "\"");
        r.seed = seed;
        r.t = t;
        rows.push_back(r);
    }
    return rows;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path temp = target.string() + ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("output: cannot write " + temp.string());
        out << content;
        if (!out) throw ConfigError("output: write failed for " + temp.string());
    }
    std::filesystem::rename(temp, target);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stderr_of(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double m = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

SlopeFit slope_fit(const std::vector<std::size_t>& episodes,
                   const std::vector<std::vector<double>>& regrets) {
    if (episodes.size() != regrets.size())
        throw ParameterError("slope_fit: grid and regret lists differ in length");
    if (episodes.size() < 4) throw ParameterError("slope_fit: need at least 4 grid points");
    SlopeFit fit;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        if (regrets[i].size() < 10)
            throw ParameterError("slope_fit: need at least 10 seeds at T = " + std::to_string(episodes[i]));
        const double m = mean_of(regrets[i]);
        fit.episodes.push_back(static_cast<double>(episodes[i]));
        fit.mean_regret.push_back(m);
        if (!(m > 0.0)) {
            std::string raw;
            for (std::size_t k = 0; k < episodes.size(); ++k)
                raw += " T=" + std::to_string(episodes[k]) + ":" + std::to_string(mean_of(regrets[k]));
            throw NumericalError("slope_fit: nonpositive mean regret;" + raw);
        }
        x.push_back(std::log(static_cast<double>(episodes[i])));
        y.push_back(std::log(m));
    }
    const double n = static_cast<double>(x.size());
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ParameterError("slope_fit: grid points must be distinct");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        ssr += r * r;
    }
    fit.stderr_slope = std::sqrt(ssr / (n - 2.0) / sxx);
    return fit;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& config, std::size_t threads) {
    std::vector<std::size_t> grid = config.episode_grid;
    if (grid.empty()) grid = {config.episodes};
    std::vector<SweepPoint> out;
    for (std::size_t T : grid) {
        SweepPoint point;
        point.episodes = T;
        point.traces = run_experiment(config, T, threads);
        std::vector<double> regrets;
        for (const auto& trace : point.traces) regrets.push_back(trace.final_regret());
        point.mean_regret = mean_of(regrets);
        point.stderr_regret = stderr_of(regrets);
        out.push_back(std::move(point));
    }
    return out;
}

} // namespace pbmdp
