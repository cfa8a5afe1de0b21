#pragma once

#include "pbmdp/mdp.hpp"
#include "pbmdp/random.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace pbmdp {

/// RandomSource that walks every outcome of a deterministic closure.
///
/// The closure is rerun once per atom; each run replays the choices of the
/// current branch and takes the first positive-probability option at new
/// choice points. `advance` moves the odometer to the next atom.
class EnumeratingSource final : public RandomSource {
public:
    bool bernoulli(double p) override;
    std::size_t categorical(std::span<const double> weights) override;
    std::size_t uniform_index(std::size_t n) override;

    void begin_atom();
    /// False once every atom has been visited.
    bool advance();
    double weight() const { return weight_; }

private:
    struct Frame {
        std::vector<std::pair<std::size_t, double>> options;
        std::size_t pick = 0;
    };
    std::size_t choose(std::vector<std::pair<std::size_t, double>> options);

    std::vector<Frame> stack_;
    std::size_t depth_ = 0;
    double weight_ = 1.0;
};

struct EnumerationStats {
    std::size_t atoms = 0;
    double total_probability = 0.0;
};

inline constexpr std::size_t kAtomBudget = 10'000'000;

/// Calls visit(probability, run(source)) for every atom of `run`.
/// Throws SizeError past `budget` atoms.
template <class Run, class Visit>
EnumerationStats enumerate_atoms(Run&& run, Visit&& visit, std::size_t budget = kAtomBudget);

/// Exact expectation of a scalar functional of one episode.
double enumerate_expectation(const std::function<double(RandomSource&)>& run,
                             EnumerationStats* stats = nullptr, std::size_t budget = kAtomBudget);

/// Exact expectation of a vector functional (all results must share a size).
std::vector<double> enumerate_expectation(
    const std::function<std::vector<double>(RandomSource&)>& run,
    EnumerationStats* stats = nullptr, std::size_t budget = kAtomBudget);

struct PolicySearchResult {
    std::vector<std::size_t> actions;
    Policy policy;
    double value = 0.0;
    std::size_t scanned = 0;
};

/// Maximizes `objective` over all deterministic Markov policies (first
/// maximizer in lexicographic action order). Needs A^(S-1) <= 1e6.
PolicySearchResult enumerate_policies(const LayeredMdp& mdp,
                                      const std::function<double(const Policy&)>& objective);

/// Vertices of {p in simplex : |p - pbar| <= conf}, boxes clamped to [0,1].
std::vector<std::vector<double>> box_simplex_vertices(std::span<const double> pbar,
                                                      std::span<const double> conf);

/// max (or min) of <values, p> over the vertices above.
double brute_force_extremal_value(std::span<const double> values, std::span<const double> pbar,
                                  std::span<const double> conf, bool maximize);

} // namespace pbmdp

#include "pbmdp/errors.hpp"

#include <string>

namespace pbmdp {

template <class Run, class Visit>
EnumerationStats enumerate_atoms(Run&& run, Visit&& visit, std::size_t budget) {
    EnumeratingSource source;
    EnumerationStats stats;
    do {
        if (stats.atoms == budget)
            throw SizeError("enumerate_atoms: more than " + std::to_string(budget) + " atoms");
        source.begin_atom();
        auto result = run(static_cast<RandomSource&>(source));
        const double p = source.weight();
        visit(p, result);
        stats.total_probability += p;
        ++stats.atoms;
    } while (source.advance());
    return stats;
}

} // namespace pbmdp
