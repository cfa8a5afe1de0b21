#include "pbmdp/confidence.hpp"

#include "pbmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pbmdp {

double conf_width(double count, double pbar, double episodes, double num_states,
                  double num_actions, double delta_prime) {
    const double log_term = std::log(episodes * num_states * num_actions / delta_prime);
    const double n = std::max(1.0, count);
    return 4.0 * std::sqrt(pbar * log_term / n) + 28.0 * log_term / (3.0 * n);
}

std::vector<double> extremal_transition(std::span<const double> values,
                                        std::span<const double> pbar,
                                        std::span<const double> conf, Extreme mode) {
    const std::size_t n = values.size();
    if (pbar.size() != n || conf.size() != n)
        throw StructuralError("extremal_transition: row sizes differ");
    std::vector<double> lower(n), upper(n);
    double lower_total = 0.0, upper_total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        lower[j] = std::clamp(pbar[j] - conf[j], 0.0, 1.0);
        upper[j] = std::clamp(pbar[j] + conf[j], 0.0, 1.0);
        lower_total += lower[j];
        upper_total += upper[j];
    }
    if (lower_total > 1.0 + 1e-12 || upper_total < 1.0 - 1e-12)
        throw InfeasibleError("extremal_transition: box does not meet the simplex");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (mode == Extreme::max)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    else
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> p = lower;
    double remaining = 1.0 - lower_total;
    for (std::size_t j : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(upper[j] - lower[j], remaining);
        p[j] += add;
        remaining -= add;
    }
    return p;
}

ConfidenceSet::ConfidenceSet(const LayeredMdp& shape, std::vector<double> pbar,
                             std::vector<double> width)
    : shape_(shape), pbar_(std::move(pbar)), width_(std::move(width)) {
    if (pbar_.size() != shape_.kernel().size() || width_.size() != shape_.kernel().size())
        throw StructuralError("ConfidenceSet: table sizes do not match the layer structure");
    for (double w : width_)
        if (!(w >= 0.0)) throw StructuralError("ConfidenceSet: negative width");
}

ConfidenceSet ConfidenceSet::vacuous(const LayeredMdp& shape) {
    return ConfidenceSet(shape, std::vector<double>(shape.kernel().size(), 0.0),
                         std::vector<double>(shape.kernel().size(), 1.0));
}

ConfidenceSet ConfidenceSet::exact(const LayeredMdp& kernel) {
    return ConfidenceSet(kernel, kernel.kernel(), std::vector<double>(kernel.kernel().size(), 0.0));
}

std::size_t ConfidenceSet::offset(std::size_t s, std::size_t a) const {
    return static_cast<std::size_t>(shape_.next_row(s, a).data() - shape_.kernel().data());
}

std::span<const double> ConfidenceSet::pbar(std::size_t s, std::size_t a) const {
    return {pbar_.data() + offset(s, a), shape_.next_row(s, a).size()};
}

std::span<const double> ConfidenceSet::width(std::size_t s, std::size_t a) const {
    return {width_.data() + offset(s, a), shape_.next_row(s, a).size()};
}

bool ConfidenceSet::contains(const LayeredMdp& kernel) const {
    if (kernel.kernel().size() != pbar_.size()) return false;
    const auto& p = kernel.kernel();
    for (std::size_t i = 0; i < p.size(); ++i)
        if (std::abs(p[i] - pbar_[i]) > width_[i] + 1e-12) return false;
    return true;
}

EpochCounters::EpochCounters(const LayeredMdp& shape)
    : shape_(shape),
      actions_(shape.num_actions()),
      n_(shape.num_nonterminal() * shape.num_actions(), 0.0),
      m_(shape.kernel().size(), 0.0),
      snapshot_(n_.size(), 0.0) {}

double EpochCounters::transitions(std::size_t s, std::size_t a, std::size_t next) const {
    const std::size_t h = shape_.layer_of(s);
    if (shape_.layer_of(next) != h + 1) return 0.0;
    const auto row = shape_.next_row(s, a);
    const std::size_t off = static_cast<std::size_t>(row.data() - shape_.kernel().data());
    return m_[off + (next - shape_.layer_begin(h + 1))];
}

bool EpochCounters::record(const Trajectory& path) {
    bool doubled = false;
    const auto& steps = path.steps;
    for (std::size_t h = 0; h < steps.size(); ++h) {
        const std::size_t s = steps[h].state;
        const std::size_t a = steps[h].action;
        const std::size_t next = h + 1 < steps.size() ? steps[h + 1].state : path.final_state;
        const auto row = shape_.next_row(s, a);
        const std::size_t off = static_cast<std::size_t>(row.data() - shape_.kernel().data());
        n_[s * actions_ + a] += 1.0;
        m_[off + (next - shape_.layer_begin(shape_.layer_of(s) + 1))] += 1.0;
    }
    for (const auto& step : steps) {
        const std::size_t i = step.state * actions_ + step.action;
        if (n_[i] >= 2.0 * std::max(1.0, snapshot_[i])) doubled = true;
    }
    if (doubled) {
        ++epoch_;
        snapshot_ = n_;
    }
    return doubled;
}

double EpochCounters::count_mismatch() const {
    double worst = 0.0;
    for (std::size_t s = 0; s < shape_.num_nonterminal(); ++s) {
        for (std::size_t a = 0; a < actions_; ++a) {
            const auto row = shape_.next_row(s, a);
            const std::size_t off = static_cast<std::size_t>(row.data() - shape_.kernel().data());
            double total = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) total += m_[off + j];
            worst = std::max(worst, std::abs(total - n_[s * actions_ + a]));
        }
    }
    return worst;
}

ConfidenceSet EpochCounters::confidence_set(double episodes, double delta_prime) const {
    std::vector<double> pbar(m_.size(), 0.0), width(m_.size(), 0.0);
    const double states = static_cast<double>(shape_.num_states());
    const double actions = static_cast<double>(actions_);
    for (std::size_t s = 0; s < shape_.num_nonterminal(); ++s) {
        for (std::size_t a = 0; a < actions_; ++a) {
            const auto row = shape_.next_row(s, a);
            const std::size_t off = static_cast<std::size_t>(row.data() - shape_.kernel().data());
            const double n = n_[s * actions_ + a];
            for (std::size_t j = 0; j < row.size(); ++j) {
                pbar[off + j] = m_[off + j] / std::max(1.0, n);
                width[off + j] = conf_width(n, pbar[off + j], episodes, states, actions, delta_prime);
            }
        }
    }
    return ConfidenceSet(shape_, std::move(pbar), std::move(width));
}

std::pair<double, double> state_reach_bounds(const ConfidenceSet& set, const Policy& policy,
                                             std::size_t target) {
    const LayeredMdp& shape = set.shape();
    const std::size_t layer = shape.layer_of(target);
    if (layer == 0) return {1.0, 1.0};
    std::vector<double> hi(shape.num_states(), 0.0), lo(shape.num_states(), 0.0);
    hi[target] = lo[target] = 1.0;
    for (std::size_t h = layer; h-- > 0;) {
        const std::size_t next_begin = shape.layer_begin(h + 1);
        const std::size_t width = shape.layer_size(h + 1);
        const std::span<const double> hi_next(hi.data() + next_begin, width);
        const std::span<const double> lo_next(lo.data() + next_begin, width);
        for (std::size_t j = 0; j < shape.layer_size(h); ++j) {
            const std::size_t u = shape.layer_begin(h) + j;
            double up = 0.0, down = 0.0;
            for (std::size_t a = 0; a < shape.num_actions(); ++a) {
                const double w = policy(u, a);
                if (w == 0.0) continue;
                const auto pb = set.pbar(u, a);
                const auto cf = set.width(u, a);
                const auto p_hi = extremal_transition(hi_next, pb, cf, Extreme::max);
                const auto p_lo = extremal_transition(lo_next, pb, cf, Extreme::min);
                double vh = 0.0, vl = 0.0;
                for (std::size_t k = 0; k < width; ++k) {
                    vh += p_hi[k] * hi_next[k];
                    vl += p_lo[k] * lo_next[k];
                }
                up += w * vh;
                down += w * vl;
            }
            hi[u] = up;
            lo[u] = down;
        }
    }
    return {hi[shape.initial_state()], lo[shape.initial_state()]};
}

OccupancyBounds occupancy_bounds(const ConfidenceSet& set, const Policy& policy) {
    const LayeredMdp& shape = set.shape();
    auto upper = StateActionTable::like(shape);
    auto lower = StateActionTable::like(shape);
    for (std::size_t s = 0; s < shape.num_nonterminal(); ++s) {
        const auto [hi, lo] = state_reach_bounds(set, policy, s);
        for (std::size_t a = 0; a < shape.num_actions(); ++a) {
            upper(s, a) = policy(s, a) * hi;
            lower(s, a) = policy(s, a) * lo;
        }
    }
    return {OccupancyMeasure(std::move(upper)), OccupancyMeasure(std::move(lower))};
}

DilatedBonus dilated_bonus(const ConfidenceSet& set, const Policy& executed,
                           const Policy& softmax, const OccupancyBounds& bounds, double delta,
                           double c) {
    const LayeredMdp& shape = set.shape();
    const double h_count = static_cast<double>(shape.horizon());
    DilatedBonus out;
    out.m.assign(shape.num_nonterminal(), 0.0);
    out.M = StateActionTable::like(shape);
    for (std::size_t s = 0; s < shape.num_nonterminal(); ++s) {
        double m = 0.0;
        for (std::size_t a = 0; a < shape.num_actions(); ++a) {
            const double denom = bounds.upper(s, a) + delta;
            const double num = c * delta * h_count +
                               h_count * (bounds.upper(s, a) - bounds.lower(s, a));
            if (denom > 0.0) m += softmax(s, a) * num / denom;
        }
        out.m[s] = m;
    }

    std::vector<double> value(shape.num_states(), 0.0);
    for (std::size_t s = shape.num_nonterminal(); s-- > 0;) {
        const std::size_t next_begin = shape.layer_begin(shape.layer_of(s) + 1);
        const std::size_t width = shape.layer_size(shape.layer_of(s) + 1);
        const std::span<const double> next(value.data() + next_begin, width);
        double v = 0.0;
        for (std::size_t a = 0; a < shape.num_actions(); ++a) {
            const auto p = extremal_transition(next, set.pbar(s, a), set.width(s, a), Extreme::max);
            double cont = 0.0;
            for (std::size_t k = 0; k < width; ++k) cont += p[k] * next[k];
            out.M(s, a) = out.m[s] + (1.0 + 1.0 / h_count) * cont;
            v += executed(s, a) * out.M(s, a);
        }
        value[s] = v;
    }

    const double envelope = std::exp(1.0) * (1.0 + c) * h_count * h_count;
    for (double v : out.M.data())
        if (v > envelope * (1.0 + 1e-9))
            throw NumericalError("dilated_bonus: M = " + std::to_string(v) +
                                 " exceeds e (1 + c) H^2 = " + std::to_string(envelope));
    return out;
}

} // namespace pbmdp
