#include "pbmdp/confidence.hpp"
#include "pbmdp/errors.hpp"
#include "pbmdp/harness.hpp"
#include "pbmdp/mdp.hpp"
#include "pbmdp/oreps.hpp"
#include "pbmdp/preference.hpp"
#include "pbmdp/random.hpp"
#include "pbmdp/verification.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace pbmdp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

StateActionTable to_table(const LayeredMdp& mdp, const Array& a, const char* what) {
    if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(0)) != mdp.num_nonterminal() ||
        static_cast<std::size_t>(a.shape(1)) != mdp.num_actions())
        throw StructuralError(std::string(what) + ": expected shape (" + std::to_string(mdp.num_nonterminal()) +
                              ", " + std::to_string(mdp.num_actions()) + ")");
    StateActionTable t = StateActionTable::like(mdp);
    std::memcpy(t.data().data(), a.data(), t.data().size() * sizeof(double));
    return t;
}

Array to_array(const StateActionTable& t) {
    Array out({t.rows(), t.cols()});
    std::memcpy(out.mutable_data(), t.data().data(), t.data().size() * sizeof(double));
    return out;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::dict trace_to_dict(const RegretTrace& trace) {
    std::vector<std::size_t> t;
    std::vector<double> cum, comp, regret;
    for (const auto& p : trace.points) {
        t.push_back(p.t);
        cum.push_back(p.cum_expected_loss);
        comp.push_back(p.comparator);
        regret.push_back(p.regret);
    }
    py::dict d;
    d["seed"] = trace.seed;
    d["t"] = t;
    d["cum_expected_loss"] = cum;
    d["comparator"] = comp;
    d["regret"] = regret;
    d["final_regret"] = trace.final_regret();
    d["cum_realized_loss"] = trace.cum_realized_loss;
    return d;
}

} // namespace

PYBIND11_MODULE(_pbmdp, m) {
    m.doc() = "Layered MDPs with dueling feedback: instances, solvers and experiment runs";

    py::class_<LayeredMdp>(m, "LayeredMdp")
        .def(py::init([](std::size_t arms, std::vector<std::size_t> layers, const Array& kernel) {
                 return LayeredMdp(arms, std::move(layers), to_vector(kernel));
             }),
             py::arg("num_arms"), py::arg("layer_sizes"), py::arg("kernel"))
        .def_property_readonly("horizon", &LayeredMdp::horizon)
        .def_property_readonly("num_arms", &LayeredMdp::num_arms)
        .def_property_readonly("num_actions", &LayeredMdp::num_actions)
        .def_property_readonly("num_states", &LayeredMdp::num_states)
        .def_property_readonly("layer_sizes", &LayeredMdp::layer_sizes)
        .def_property_readonly("kernel", &LayeredMdp::kernel)
        .def("layer_of", &LayeredMdp::layer_of)
        .def("next_row", [](const LayeredMdp& mdp, std::size_t s, std::size_t a) {
            const auto row = mdp.next_row(s, a);
            return std::vector<double>(row.begin(), row.end());
        });

    m.def("uniform_layered_mdp", &make_uniform_layered_mdp, py::arg("horizon"), py::arg("layer_width"),
          py::arg("num_arms"));
    m.def("random_layered_mdp", &random_layered_mdp, py::arg("horizon"), py::arg("max_width"),
          py::arg("num_arms"), py::arg("seed"), py::arg("random_widths") = false);

    m.def(
        "occupancy",
        [](const LayeredMdp& mdp, const Array& policy) {
            return to_array(occupancy_of_policy(mdp, Policy(to_table(mdp, policy, "policy"))).table());
        },
        py::arg("mdp"), py::arg("policy"));
    m.def(
        "initial_value",
        [](const LayeredMdp& mdp, const Array& policy, const Array& loss) {
            return initial_value(mdp, Policy(to_table(mdp, policy, "policy")), to_table(mdp, loss, "loss"));
        },
        py::arg("mdp"), py::arg("policy"), py::arg("loss"));
    m.def(
        "best_fixed_policy",
        [](const LayeredMdp& mdp, const Array& cumulative) {
            const auto r = best_fixed_policy(mdp, to_table(mdp, cumulative, "cumulative_loss"));
            return py::make_tuple(to_array(r.policy.table()), r.value);
        },
        py::arg("mdp"), py::arg("cumulative_loss"), "Deterministic minimizer and its total value.");
    m.def(
        "max_reach", [](const LayeredMdp& mdp, std::size_t target) { return max_reach(mdp, target).value; },
        py::arg("mdp"), py::arg("target"));
    m.def(
        "ftrl_update",
        [](const LayeredMdp& mdp, const Array& cumulative, double eta) {
            return to_array(ftrl_update(mdp, FtrlState{to_table(mdp, cumulative, "cumulative_loss"), eta}).q.table());
        },
        py::arg("mdp"), py::arg("cumulative_loss"), py::arg("eta"),
        "Entropy-regularized minimizer over the occupancy polytope.");

    m.def(
        "borda_scores",
        [](const Array& matrix) {
            if (matrix.ndim() != 2 || matrix.shape(0) != matrix.shape(1))
                throw StructuralError("borda_scores: expected a square matrix");
            const auto k = static_cast<std::size_t>(matrix.shape(0));
            return borda_scores(PreferenceModel::constant(1, k, to_vector(matrix)), 0);
        },
        py::arg("matrix"));
    m.def("block_preference_matrix", &block_preference_matrix, py::arg("num_arms"), py::arg("epsilon"),
          py::arg("planted") = std::nullopt);
    m.def(
        "extremal_transition",
        [](const Array& values, const Array& pbar, const Array& conf, bool maximize) {
            return extremal_transition(to_vector(values), to_vector(pbar), to_vector(conf),
                                       maximize ? Extreme::max : Extreme::min);
        },
        py::arg("values"), py::arg("pbar"), py::arg("conf"), py::arg("maximize") = true);
    m.def("philox4x32", &philox4x32, py::arg("counter"), py::arg("key"));

    m.def(
        "validate_config", [](const std::string& text) { parse_config(text); }, py::arg("config_json"),
        "Raises ValueError when the JSON config is invalid.");
    m.def(
        "run_experiment",
        [](const std::string& text, std::optional<std::size_t> episodes, std::size_t threads) {
            const auto cfg = parse_config(text);
            std::vector<RegretTrace> traces;
            {
                py::gil_scoped_release release;
                traces = run_experiment(cfg, episodes.value_or(cfg.episodes), threads);
            }
            py::list out;
            for (const auto& t : traces) out.append(trace_to_dict(t));
            return out;
        },
        py::arg("config_json"), py::arg("episodes") = std::nullopt, py::arg("threads") = 1,
        "Runs every seed of a JSON config; returns one dict per seed.");
    m.def(
        "run_experiment_csv",
        [](const std::string& text, std::optional<std::size_t> episodes, std::size_t threads) {
            const auto cfg = parse_config(text);
            py::gil_scoped_release release;
            return traces_to_csv(run_experiment(cfg, episodes.value_or(cfg.episodes), threads));
        },
        py::arg("config_json"), py::arg("episodes") = std::nullopt, py::arg("threads") = 1);
    m.def(
        "slope_fit",
        [](const std::vector<std::size_t>& grid, const std::vector<std::vector<double>>& regrets) {
            const auto f = slope_fit(grid, regrets);
            return py::make_tuple(f.slope, f.intercept, f.stderr_slope);
        },
        py::arg("episodes"), py::arg("regrets"), "Returns (slope, intercept, stderr of slope).");
    m.def("verify", [] {
        py::list out;
        std::vector<CheckResult> checks;
        {
            py::gil_scoped_release release;
            checks = run_lemma_suite();
        }
        for (const auto& c : checks) {
            py::dict d;
            d["name"] = c.name;
            d["passed"] = c.passed;
            d["worst"] = c.worst;
            d["tolerance"] = c.tolerance;
            d["detail"] = c.detail;
            out.append(d);
        }
        return out;
    });
}
