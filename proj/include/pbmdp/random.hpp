#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace pbmdp {

/// Source of every random choice made during an episode.
///
/// Simulation code never draws raw numbers; it asks for a Bernoulli coin, a
/// categorical index or a uniform index. This lets the brute-force oracle
/// substitute a branching implementation that visits every outcome with its
/// exact probability.
class RandomSource {
public:
    virtual ~RandomSource() = default;

    virtual bool bernoulli(double p) = 0;
    /// `weights` must be nonnegative and sum to one.
    virtual std::size_t categorical(std::span<const double> weights) = 0;
    virtual std::size_t uniform_index(std::size_t n) = 0;
};

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

enum class StreamRole : std::uint32_t {
    learner = 1,
    environment_transitions = 2,
    environment_feedback = 3,
    environment_schedule = 4,
    instance = 5,
};

/// Counter-based stream keyed by (seed, role, substream).
///
/// The key carries the 64-bit seed; counter words 2 and 3 carry the role and
/// substream, words 0 and 1 the block index. Streams with different
/// (seed, role, substream) never overlap, and output depends only on the
/// number of draws made so far.
class PhiloxSource final : public RandomSource {
public:
    PhiloxSource(std::uint64_t seed, StreamRole role, std::uint32_t substream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double uniform01();

    bool bernoulli(double p) override;
    std::size_t categorical(std::span<const double> weights) override;
    std::size_t uniform_index(std::size_t n) override;

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t role_;
    std::uint32_t substream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    unsigned buffered_ = 0;
};

} // namespace pbmdp
