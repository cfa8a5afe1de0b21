#pragma once

#include "pbmdp/mdp.hpp"
#include "pbmdp/random.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pbmdp {

/// Per-state pairwise preference probabilities P(s, i, j): the chance that
/// arm i beats arm j at state s. Defined for every non-terminal state.
class PreferenceModel {
public:
    PreferenceModel() = default;
    /// `data` is row-major [state][i][j]. Throws StructuralError unless every
    /// entry is in [0,1] and P(s,i,j) + P(s,j,i) = 1 within 1e-12.
    PreferenceModel(std::size_t num_states, std::size_t num_arms, std::vector<double> data);

    /// The same K x K matrix at every state.
    static PreferenceModel constant(std::size_t num_states, std::size_t num_arms,
                                    std::span<const double> matrix);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_arms() const { return num_arms_; }
    double operator()(std::size_t s, std::size_t i, std::size_t j) const {
        return data_[(s * num_arms_ + i) * num_arms_ + j];
    }
    std::span<const double> matrix(std::size_t s) const {
        return {data_.data() + s * num_arms_ * num_arms_, num_arms_ * num_arms_};
    }

private:
    std::size_t num_states_ = 0;
    std::size_t num_arms_ = 0;
    std::vector<double> data_;
};

/// b(s,i) = (1/K) sum_j (P(s,i,j) - 1), in [-1, 0].
std::vector<double> borda_scores(const PreferenceModel& pref, std::size_t s);

/// -(b(left) + b(right)) / 2, in [0, 1] for scores in [-1, 0].
double loss_from_borda(std::span<const double> borda, std::size_t left, std::size_t right);

/// Full loss table induced by the Borda scores of every state.
LossTable borda_loss_table(const LayeredMdp& mdp, const PreferenceModel& pref);

bool sample_feedback(const PreferenceModel& pref, std::size_t s, std::size_t left,
                     std::size_t right, RandomSource& rng);

/// Singleton first/last layers and H-1 intermediate layers of width
/// `layer_width`; every transition is uniform over the next layer.
LayeredMdp make_uniform_layered_mdp(std::size_t horizon, std::size_t layer_width,
                                    std::size_t num_arms);

/// Layered MDP with kernel rows drawn from the instance stream of `seed`, each
/// entry at least 0.1 / (1.1 S'). Middle layers have S' states, or a random
/// width in 1..S' when `random_widths` is set.
LayeredMdp random_layered_mdp(std::size_t horizon, std::size_t max_width, std::size_t num_arms,
                              std::uint64_t seed, bool random_widths = false);

/// Skew-symmetric preferences with off-diagonal entries uniform in [0.05, 0.95].
PreferenceModel random_preference_model(std::size_t num_states, std::size_t num_arms,
                                        std::uint64_t seed);

/// K x K block matrix with good arms {0..K/2-1}: ties within a half, good beats
/// bad with probability 0.9. With `planted = m`, arm m beats every bad arm with
/// probability 0.9 + 2 epsilon. Requires K even.
std::vector<double> block_preference_matrix(std::size_t num_arms, double epsilon,
                                            std::optional<std::size_t> planted);

/// What a learner observes at a visited state.
enum class FeedbackKind { preference, loss };

/// Source of the per-episode loss functions.
///
/// Learners never see this object: the simulation world samples feedback from
/// it and the harness reads `loss_table()` for evaluation only. Instances are
/// single-owner and mutable (their schedule stream advances per episode).
class Environment {
public:
    virtual ~Environment() = default;

    virtual FeedbackKind feedback_kind() const = 0;
    /// Advances to episode t (1-based); must be called with t = 1, 2, ...
    virtual void begin_episode(std::size_t t) = 0;
    /// True loss function of the current episode.
    virtual const LossTable& loss_table() const = 0;
    /// Current P_t(s, left, right); throws StructuralError for loss feedback.
    virtual double preference(std::size_t s, std::size_t left, std::size_t right) const = 0;
    /// A copy rewound to before episode 1 that replays the same loss sequence.
    virtual std::unique_ptr<Environment> restarted() const = 0;
};

/// Preference environment whose model changes only through `next_model`.
class PreferenceEnvironment : public Environment {
public:
    FeedbackKind feedback_kind() const override { return FeedbackKind::preference; }
    const LossTable& loss_table() const override { return loss_; }
    double preference(std::size_t s, std::size_t left, std::size_t right) const override {
        return model_(s, left, right);
    }
    const PreferenceModel& model() const { return model_; }

protected:
    PreferenceEnvironment(const LayeredMdp& mdp, PreferenceModel initial);
    void set_model(PreferenceModel model);
    const LayeredMdp& mdp() const { return mdp_; }

private:
    LayeredMdp mdp_;
    PreferenceModel model_;
    LossTable loss_;
};

class FixedPreferenceEnvironment final : public PreferenceEnvironment {
public:
    FixedPreferenceEnvironment(const LayeredMdp& mdp, PreferenceModel model)
        : PreferenceEnvironment(mdp, std::move(model)) {}
    void begin_episode(std::size_t) override {}
    std::unique_ptr<Environment> restarted() const override;
};

/// Each episode independently uses `alternative` with probability
/// `switch_probability` and `base` otherwise.
class SwitchingPreferenceEnvironment final : public PreferenceEnvironment {
public:
    SwitchingPreferenceEnvironment(const LayeredMdp& mdp, PreferenceModel base,
                                   PreferenceModel alternative, double switch_probability,
                                   std::uint64_t seed);
    void begin_episode(std::size_t t) override;
    std::unique_ptr<Environment> restarted() const override;
    bool using_alternative() const { return using_alternative_; }

private:
    PreferenceModel base_;
    PreferenceModel alternative_;
    double switch_probability_;
    std::uint64_t seed_;
    PhiloxSource schedule_;
    bool using_alternative_ = false;
};

/// Arbitrary adversary: the callback builds P_t from the episode index and a
/// dedicated schedule stream.
using PreferenceGenerator =
    std::function<PreferenceModel(std::size_t t, RandomSource& schedule)>;

class GeneratedPreferenceEnvironment final : public PreferenceEnvironment {
public:
    GeneratedPreferenceEnvironment(const LayeredMdp& mdp, PreferenceGenerator generator,
                                   std::uint64_t seed);
    void begin_episode(std::size_t t) override;
    std::unique_ptr<Environment> restarted() const override;

private:
    PreferenceGenerator generator_;
    std::uint64_t seed_;
    PhiloxSource schedule_;
};

/// Loss-feedback environment with independent Bernoulli losses per episode.
/// `loss_table()` holds the realized draws of the current episode.
class StochasticLossEnvironment final : public Environment {
public:
    StochasticLossEnvironment(const LayeredMdp& mdp, LossTable means, std::uint64_t seed);

    FeedbackKind feedback_kind() const override { return FeedbackKind::loss; }
    void begin_episode(std::size_t t) override;
    const LossTable& loss_table() const override { return realized_; }
    double preference(std::size_t, std::size_t, std::size_t) const override;
    std::unique_ptr<Environment> restarted() const override;
    const LossTable& mean_loss() const { return means_; }

private:
    LossTable means_;
    std::uint64_t seed_;
    PhiloxSource schedule_;
    LossTable realized_;
};

/// Planted structure of the lower-bound instances.
///
/// `planted` has one entry per non-terminal state: an action index for loss
/// instances, a good arm index (< K/2) for preference instances. The entry for
/// the initial state is unused; only states of layers 1..H-1 carry a gap.
struct HardInstanceParams {
    double epsilon = 0.0;
    std::vector<std::size_t> planted;
    std::optional<std::size_t> excluded_state;
};

/// Means for the loss instance: 1/2 - epsilon on the planted action of every
/// state in layers 1..H-1 other than the excluded one, 1/2 elsewhere on those
/// layers, and 0 at the initial state. Requires epsilon in [0, 1/4].
LossTable loss_lb_means(const LayeredMdp& mdp, const HardInstanceParams& params);
std::unique_ptr<StochasticLossEnvironment> make_loss_lb_instance(const HardInstanceParams& params,
                                                                 const LayeredMdp& mdp,
                                                                 std::uint64_t seed);

/// Block matrix perturbed towards the planted arm at every state of layers
/// 1..H-1 other than the excluded one; the plain block matrix elsewhere.
/// Requires K even and epsilon in (0, 1/20].
PreferenceModel pref_lb_model(const LayeredMdp& mdp, const HardInstanceParams& params);
std::unique_ptr<FixedPreferenceEnvironment> make_pref_lb_instance(const HardInstanceParams& params,
                                                                  const LayeredMdp& mdp);

/// Uniformly random planted actions (or good arms when `good_arms_only`),
/// drawn from the instance stream of `seed`.
std::vector<std::size_t> draw_planted(const LayeredMdp& mdp, bool good_arms_only,
                                      std::uint64_t seed);

} // namespace pbmdp
