#include "pbmdp/oracle.hpp"

#include "pbmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pbmdp {

std::size_t EnumeratingSource::choose(std::vector<std::pair<std::size_t, double>> options) {
    if (options.empty()) throw std::logic_error("EnumeratingSource: no positive-probability option");
    if (depth_ < stack_.size()) {
        const Frame& frame = stack_[depth_];
        if (frame.options.size() != options.size())
            throw std::logic_error("EnumeratingSource: closure is not deterministic");
        const auto& chosen = frame.options[frame.pick];
        weight_ *= chosen.second;
        ++depth_;
        return chosen.first;
    }
    stack_.push_back({std::move(options), 0});
    const auto& chosen = stack_.back().options.front();
    weight_ *= chosen.second;
    ++depth_;
    return chosen.first;
}

bool EnumeratingSource::bernoulli(double p) {
    std::vector<std::pair<std::size_t, double>> options;
    if (p > 0.0) options.emplace_back(1, p);
    if (p < 1.0) options.emplace_back(0, 1.0 - p);
    return choose(std::move(options)) == 1;
}

std::size_t EnumeratingSource::categorical(std::span<const double> weights) {
    std::vector<std::pair<std::size_t, double>> options;
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (weights[i] > 0.0) options.emplace_back(i, weights[i]);
    return choose(std::move(options));
}

std::size_t EnumeratingSource::uniform_index(std::size_t n) {
    std::vector<std::pair<std::size_t, double>> options;
    for (std::size_t i = 0; i < n; ++i) options.emplace_back(i, 1.0 / static_cast<double>(n));
    return choose(std::move(options));
}

void EnumeratingSource::begin_atom() {
    depth_ = 0;
    weight_ = 1.0;
}

bool EnumeratingSource::advance() {
    stack_.resize(depth_);
    while (!stack_.empty()) {
        Frame& frame = stack_.back();
        if (frame.pick + 1 < frame.options.size()) {
            ++frame.pick;
            return true;
        }
        stack_.pop_back();
    }
    return false;
}

double enumerate_expectation(const std::function<double(RandomSource&)>& run,
                             EnumerationStats* stats, std::size_t budget) {
    double total = 0.0;
    const auto s = enumerate_atoms(run, [&](double p, double v) { total += p * v; }, budget);
    if (stats) *stats = s;
    return total;
}

std::vector<double> enumerate_expectation(
    const std::function<std::vector<double>(RandomSource&)>& run, EnumerationStats* stats,
    std::size_t budget) {
    std::vector<double> total;
    const auto s = enumerate_atoms(
        run,
        [&](double p, const std::vector<double>& v) {
            if (total.empty()) total.assign(v.size(), 0.0);
            if (v.size() != total.size())
                throw std::logic_error("enumerate_expectation: functional changed size");
            for (std::size_t i = 0; i < v.size(); ++i) total[i] += p * v[i];
        },
        budget);
    if (stats) *stats = s;
    return total;
}

PolicySearchResult enumerate_policies(const LayeredMdp& mdp,
                                      const std::function<double(const Policy&)>& objective) {
    const std::size_t states = mdp.num_nonterminal();
    const std::size_t actions = mdp.num_actions();
    double count = std::pow(static_cast<double>(actions), static_cast<double>(states));
    if (count > 1e6)
        throw SizeError("enumerate_policies: A^(S-1) = " + std::to_string(count) + " exceeds 1e6");

    PolicySearchResult best;
    best.value = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> choice(states, 0);
    while (true) {
        const Policy pi = Policy::deterministic(mdp, choice);
        const double v = objective(pi);
        ++best.scanned;
        if (v > best.value) {
            best.value = v;
            best.actions = choice;
            best.policy = pi;
        }
        // Odometer with the last state varying fastest.
        std::size_t pos = states;
        while (pos > 0) {
            --pos;
            if (++choice[pos] < actions) break;
            choice[pos] = 0;
            if (pos == 0) return best;
        }
        if (states == 0) return best;
    }
}

std::vector<std::vector<double>> box_simplex_vertices(std::span<const double> pbar,
                                                      std::span<const double> conf) {
    const std::size_t n = pbar.size();
    if (n > 20) throw SizeError("box_simplex_vertices: too many coordinates");
    std::vector<double> lo(n), hi(n);
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = std::clamp(pbar[j] - conf[j], 0.0, 1.0);
        hi[j] = std::clamp(pbar[j] + conf[j], 0.0, 1.0);
    }
    // A vertex has at most one coordinate strictly inside its box.
    std::vector<std::vector<double>> vertices;
    for (std::size_t free = 0; free < n; ++free) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
            std::vector<double> p(n);
            double total = 0.0;
            std::size_t bit = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == free) continue;
                p[j] = (mask >> bit++) & 1U ? hi[j] : lo[j];
                total += p[j];
            }
            p[free] = 1.0 - total;
            if (p[free] >= lo[free] - 1e-12 && p[free] <= hi[free] + 1e-12) vertices.push_back(p);
        }
    }
    return vertices;
}

double brute_force_extremal_value(std::span<const double> values, std::span<const double> pbar,
                                  std::span<const double> conf, bool maximize) {
    const auto vertices = box_simplex_vertices(pbar, conf);
    if (vertices.empty()) throw InfeasibleError("brute_force_extremal_value: empty set");
    double best = maximize ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    for (const auto& p : vertices) {
        double v = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) v += p[j] * values[j];
        best = maximize ? std::max(best, v) : std::min(best, v);
    }
    return best;
}

} // namespace pbmdp
