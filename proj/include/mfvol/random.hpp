#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mfvol {

/**
 * Philox4x32-10 counter-based generator (Salmon et al., SC'11).
 *
 * The 64-bit seed is the key; the stream id fills the upper half of the
 * 128-bit counter, so (seed, stream) pairs give independent sequences.
 * Satisfies UniformRandomBitGenerator.
 */
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// The raw block function.
    static counter_type block(counter_type ctr, key_type key) noexcept;

private:
    key_type key_;
    counter_type ctr_;
    counter_type buf_{};
    unsigned used_ = 4;
};

/// Uniform and standard normal variates drawn from a Philox stream, with a
/// platform-independent transformation (unlike std::normal_distribution).
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : gen_(seed, stream)
    {
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept;
    /// Box-Muller.
    double normal() noexcept;

    Philox4x32& generator() noexcept { return gen_; }

private:
    Philox4x32 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mfvol
