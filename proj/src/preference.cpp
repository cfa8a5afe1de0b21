#include "pbmdp/preference.hpp"

#include "pbmdp/errors.hpp"

#include <cmath>
#include <string>

namespace pbmdp {

namespace {

constexpr double kSkewTol = 1e-12;

void check_planted(const LayeredMdp& mdp, const HardInstanceParams& params, std::size_t bound,
                   const char* what) {
    if (params.planted.size() != mdp.num_nonterminal())
        throw ParameterError(std::string(what) + ": need one planted entry per non-terminal state");
    for (std::size_t s = 1; s < params.planted.size(); ++s) {
        if (params.planted[s] >= bound)
            throw ParameterError(std::string(what) + ": planted entry " +
                                 std::to_string(params.planted[s]) + " at state " +
                                 std::to_string(s) + " must be below " + std::to_string(bound));
    }
    if (params.excluded_state &&
        (*params.excluded_state == 0 || *params.excluded_state >= mdp.num_nonterminal()))
        throw ParameterError(std::string(what) + ": excluded state must be an intermediate state");
}

bool carries_gap(const HardInstanceParams& params, std::size_t s) {
    return s != 0 && (!params.excluded_state || *params.excluded_state != s);
}

} // namespace

PreferenceModel::PreferenceModel(std::size_t num_states, std::size_t num_arms,
                                 std::vector<double> data)
    : num_states_(num_states), num_arms_(num_arms), data_(std::move(data)) {
    if (num_arms_ == 0) throw StructuralError("PreferenceModel: need at least one arm");
    if (data_.size() != num_states_ * num_arms_ * num_arms_)
        throw StructuralError("PreferenceModel: data size does not match states x K x K");
    for (std::size_t s = 0; s < num_states_; ++s) {
        for (std::size_t i = 0; i < num_arms_; ++i) {
            for (std::size_t j = 0; j < num_arms_; ++j) {
                const double p = (*this)(s, i, j);
                if (!(p >= 0.0 && p <= 1.0))
                    throw StructuralError("PreferenceModel: probability outside [0,1]");
                if (std::abs(p + (*this)(s, j, i) - 1.0) > kSkewTol)
                    throw StructuralError("PreferenceModel: skew symmetry violated at state " +
                                          std::to_string(s) + ", pair (" + std::to_string(i) +
                                          "," + std::to_string(j) + ")");
            }
        }
    }
}

PreferenceModel PreferenceModel::constant(std::size_t num_states, std::size_t num_arms,
                                          std::span<const double> matrix) {
    if (matrix.size() != num_arms * num_arms)
        throw StructuralError("PreferenceModel::constant: matrix must be K x K");
    std::vector<double> data;
    data.reserve(num_states * matrix.size());
    for (std::size_t s = 0; s < num_states; ++s) data.insert(data.end(), matrix.begin(), matrix.end());
    return PreferenceModel(num_states, num_arms, std::move(data));
}

std::vector<double> borda_scores(const PreferenceModel& pref, std::size_t s) {
    const std::size_t k = pref.num_arms();
    std::vector<double> b(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += pref(s, i, j) - 1.0;
        b[i] = total / static_cast<double>(k);
    }
    return b;
}

double loss_from_borda(std::span<const double> borda, std::size_t left, std::size_t right) {
    return -0.5 * (borda[left] + borda[right]);
}

LossTable borda_loss_table(const LayeredMdp& mdp, const PreferenceModel& pref) {
    if (pref.num_states() != mdp.num_nonterminal() || pref.num_arms() != mdp.num_arms())
        throw StructuralError("borda_loss_table: preference model does not match the MDP");
    const std::size_t k = mdp.num_arms();
    auto loss = LossTable::like(mdp);
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const auto b = borda_scores(pref, s);
        for (std::size_t a = 0; a < mdp.num_actions(); ++a)
            loss(s, a) = loss_from_borda(b, left_arm(a, k), right_arm(a, k));
    }
    return loss;
}

bool sample_feedback(const PreferenceModel& pref, std::size_t s, std::size_t left,
                     std::size_t right, RandomSource& rng) {
    return rng.bernoulli(pref(s, left, right));
}

LayeredMdp make_uniform_layered_mdp(std::size_t horizon, std::size_t layer_width,
                                    std::size_t num_arms) {
    if (horizon < 2) throw ParameterError("make_uniform_layered_mdp: need H >= 2");
    if (layer_width < 1 || num_arms < 1)
        throw ParameterError("make_uniform_layered_mdp: need S' >= 1 and K >= 1");
    std::vector<std::size_t> layers(horizon + 1, layer_width);
    layers.front() = 1;
    layers.back() = 1;
    const std::size_t actions = num_arms * num_arms;
    std::vector<double> kernel;
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t next = layers[h + 1];
        for (std::size_t j = 0; j < layers[h] * actions; ++j)
            kernel.insert(kernel.end(), next, 1.0 / static_cast<double>(next));
    }
    return LayeredMdp(num_arms, std::move(layers), std::move(kernel));
}

LayeredMdp random_layered_mdp(std::size_t horizon, std::size_t max_width, std::size_t num_arms,
                              std::uint64_t seed, bool random_widths) {
    if (horizon < 1 || max_width < 1 || num_arms < 1)
        throw ParameterError("random_layered_mdp: need H, S', K >= 1");
    PhiloxSource rng(seed, StreamRole::instance, 1);
    std::vector<std::size_t> layers(horizon + 1, max_width);
    layers.front() = 1;
    layers.back() = 1;
    if (random_widths)
        for (std::size_t h = 1; h < horizon; ++h) layers[h] = 1 + rng.uniform_index(max_width);
    const std::size_t actions = num_arms * num_arms;
    std::vector<double> kernel;
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t next = layers[h + 1];
        for (std::size_t j = 0; j < layers[h] * actions; ++j) {
            // Weights bounded away from zero keep every state reachable.
            std::vector<double> row(next);
            double total = 0.0;
            for (double& w : row) total += (w = 0.1 + rng.uniform01());
            for (double& w : row) kernel.push_back(w / total);
        }
    }
    return LayeredMdp(num_arms, std::move(layers), std::move(kernel));
}

PreferenceModel random_preference_model(std::size_t num_states, std::size_t num_arms,
                                        std::uint64_t seed) {
    PhiloxSource rng(seed, StreamRole::instance, 2);
    std::vector<double> data(num_states * num_arms * num_arms, 0.5);
    for (std::size_t s = 0; s < num_states; ++s) {
        for (std::size_t i = 0; i < num_arms; ++i) {
            for (std::size_t j = i + 1; j < num_arms; ++j) {
                const double p = 0.05 + 0.9 * rng.uniform01();
                data[(s * num_arms + i) * num_arms + j] = p;
                data[(s * num_arms + j) * num_arms + i] = 1.0 - p;
            }
        }
    }
    return PreferenceModel(num_states, num_arms, std::move(data));
}

std::vector<double> block_preference_matrix(std::size_t num_arms, double epsilon,
                                            std::optional<std::size_t> planted) {
    if (num_arms == 0 || num_arms % 2 != 0)
        throw ParameterError("block_preference_matrix: K must be even");
    const std::size_t half = num_arms / 2;
    if (planted && *planted >= half)
        throw ParameterError("block_preference_matrix: planted arm must be a good arm");
    std::vector<double> p(num_arms * num_arms, 0.5);
    for (std::size_t i = 0; i < num_arms; ++i) {
        for (std::size_t j = 0; j < num_arms; ++j) {
            const bool good_i = i < half;
            const bool good_j = j < half;
            if (good_i && !good_j) p[i * num_arms + j] = 0.9;
            if (!good_i && good_j) p[i * num_arms + j] = 0.1;
        }
    }
    if (planted) {
        const std::size_t m = *planted;
        for (std::size_t j = half; j < num_arms; ++j) {
            p[m * num_arms + j] = 0.9 + 2.0 * epsilon;
            p[j * num_arms + m] = 0.1 - 2.0 * epsilon;
        }
    }
    return p;
}

PreferenceEnvironment::PreferenceEnvironment(const LayeredMdp& mdp, PreferenceModel initial)
    : mdp_(mdp) {
    set_model(std::move(initial));
}

void PreferenceEnvironment::set_model(PreferenceModel model) {
    loss_ = borda_loss_table(mdp_, model);
    model_ = std::move(model);
}

std::unique_ptr<Environment> FixedPreferenceEnvironment::restarted() const {
    return std::make_unique<FixedPreferenceEnvironment>(mdp(), model());
}

SwitchingPreferenceEnvironment::SwitchingPreferenceEnvironment(const LayeredMdp& mdp,
                                                               PreferenceModel base,
                                                               PreferenceModel alternative,
                                                               double switch_probability,
                                                               std::uint64_t seed)
    : PreferenceEnvironment(mdp, base),
      base_(std::move(base)),
      alternative_(std::move(alternative)),
      switch_probability_(switch_probability),
      seed_(seed),
      schedule_(seed, StreamRole::environment_schedule) {
    if (!(switch_probability >= 0.0 && switch_probability <= 1.0))
        throw ParameterError("switching environment: switch probability must be in [0,1]");
    if (alternative_.num_states() != base_.num_states() ||
        alternative_.num_arms() != base_.num_arms())
        throw StructuralError("switching environment: models differ in shape");
}

void SwitchingPreferenceEnvironment::begin_episode(std::size_t) {
    const bool alt = schedule_.bernoulli(switch_probability_);
    if (alt != using_alternative_) set_model(alt ? alternative_ : base_);
    using_alternative_ = alt;
}

std::unique_ptr<Environment> SwitchingPreferenceEnvironment::restarted() const {
    return std::make_unique<SwitchingPreferenceEnvironment>(mdp(), base_, alternative_,
                                                            switch_probability_, seed_);
}

GeneratedPreferenceEnvironment::GeneratedPreferenceEnvironment(const LayeredMdp& mdp,
                                                               PreferenceGenerator generator,
                                                               std::uint64_t seed)
    : PreferenceEnvironment(
          mdp, PreferenceModel::constant(mdp.num_nonterminal(), mdp.num_arms(),
                                         std::vector<double>(mdp.num_actions(), 0.5))),
      generator_(std::move(generator)),
      seed_(seed),
      schedule_(seed, StreamRole::environment_schedule) {}

void GeneratedPreferenceEnvironment::begin_episode(std::size_t t) {
    set_model(generator_(t, schedule_));
}

std::unique_ptr<Environment> GeneratedPreferenceEnvironment::restarted() const {
    return std::make_unique<GeneratedPreferenceEnvironment>(mdp(), generator_, seed_);
}

StochasticLossEnvironment::StochasticLossEnvironment(const LayeredMdp& mdp, LossTable means,
                                                     std::uint64_t seed)
    : means_(std::move(means)),
      seed_(seed),
      schedule_(seed, StreamRole::environment_schedule),
      realized_(means_) {
    if (means_.rows() != mdp.num_nonterminal() || means_.cols() != mdp.num_actions())
        throw StructuralError("StochasticLossEnvironment: mean table does not match the MDP");
    for (double m : means_.data())
        if (!(m >= 0.0 && m <= 1.0))
            throw ParameterError("StochasticLossEnvironment: means must lie in [0,1]");
}

void StochasticLossEnvironment::begin_episode(std::size_t) {
    auto& out = realized_.data();
    const auto& mean = means_.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = schedule_.bernoulli(mean[i]) ? 1.0 : 0.0;
}

double StochasticLossEnvironment::preference(std::size_t, std::size_t, std::size_t) const {
    throw StructuralError("StochasticLossEnvironment: loss-feedback environment has no preferences");
}

std::unique_ptr<Environment> StochasticLossEnvironment::restarted() const {
    auto copy = std::make_unique<StochasticLossEnvironment>(*this);
    copy->schedule_ = PhiloxSource(seed_, StreamRole::environment_schedule);
    copy->realized_ = means_;
    return copy;
}

LossTable loss_lb_means(const LayeredMdp& mdp, const HardInstanceParams& params) {
    if (!(params.epsilon >= 0.0 && params.epsilon <= 0.25))
        throw ParameterError("loss instance: epsilon must lie in [0, 1/4], got " +
                             std::to_string(params.epsilon));
    check_planted(mdp, params, mdp.num_actions(), "loss instance");
    auto means = LossTable::like(mdp, 0.5);
    auto first = means.row(0);
    std::fill(first.begin(), first.end(), 0.0);
    for (std::size_t s = 1; s < mdp.num_nonterminal(); ++s)
        if (carries_gap(params, s)) means(s, params.planted[s]) = 0.5 - params.epsilon;
    return means;
}

std::unique_ptr<StochasticLossEnvironment> make_loss_lb_instance(const HardInstanceParams& params,
                                                                 const LayeredMdp& mdp,
                                                                 std::uint64_t seed) {
    return std::make_unique<StochasticLossEnvironment>(mdp, loss_lb_means(mdp, params), seed);
}

PreferenceModel pref_lb_model(const LayeredMdp& mdp, const HardInstanceParams& params) {
    const std::size_t k = mdp.num_arms();
    if (k % 2 != 0) throw ParameterError("preference instance: K must be even");
    if (!(params.epsilon > 0.0 && params.epsilon <= 0.05))
        throw ParameterError("preference instance: epsilon must lie in (0, 1/20], got " +
                             std::to_string(params.epsilon));
    check_planted(mdp, params, k / 2, "preference instance");
    const auto plain = block_preference_matrix(k, params.epsilon, std::nullopt);
    std::vector<double> data;
    data.reserve(mdp.num_nonterminal() * plain.size());
    for (std::size_t s = 0; s < mdp.num_nonterminal(); ++s) {
        const auto m = carries_gap(params, s)
                           ? block_preference_matrix(k, params.epsilon, params.planted[s])
                           : plain;
        data.insert(data.end(), m.begin(), m.end());
    }
    return PreferenceModel(mdp.num_nonterminal(), k, std::move(data));
}

std::unique_ptr<FixedPreferenceEnvironment> make_pref_lb_instance(const HardInstanceParams& params,
                                                                  const LayeredMdp& mdp) {
    return std::make_unique<FixedPreferenceEnvironment>(mdp, pref_lb_model(mdp, params));
}

std::vector<std::size_t> draw_planted(const LayeredMdp& mdp, bool good_arms_only,
                                      std::uint64_t seed) {
    PhiloxSource rng(seed, StreamRole::instance);
    const std::size_t bound = good_arms_only ? mdp.num_arms() / 2 : mdp.num_actions();
    if (bound == 0) throw ParameterError("draw_planted: no admissible planted values");
    std::vector<std::size_t> planted(mdp.num_nonterminal(), 0);
    for (std::size_t s = 1; s < planted.size(); ++s) planted[s] = rng.uniform_index(bound);
    return planted;
}

} // namespace pbmdp
