#pragma once

#include <cstdint>

namespace stein {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based random stream. Draw i of stream j under seed s is a pure
// function of (s, j, i), so Monte Carlo loops can be split across workers
// by sample index without changing any value.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : base_(detail::splitmix64(detail::splitmix64(seed) ^
                                   (0x6a09e667f3bcc909ULL + detail::splitmix64(~stream)))) {}

    // Position the stream so the next draw is draw `index`.
    void jump_to(std::uint64_t index) { counter_ = index; }
    std::uint64_t position() const { return counter_; }

    std::uint64_t next_u64() { return detail::splitmix64(base_ + 0x9e3779b97f4a7c15ULL * counter_++); }

    // Uniform on the open interval (0,1); never returns an exact endpoint.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Stateless form: draw `index` of this stream without advancing.
    double uniform_at(std::uint64_t index) const {
        std::uint64_t u = detail::splitmix64(base_ + 0x9e3779b97f4a7c15ULL * index);
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

// Derives well-separated stream ids from a label and small integers, for
// the named-substream convention (one logical stream per purpose).
inline std::uint64_t substream_id(std::uint64_t purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = detail::splitmix64(purpose * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL);
    h = detail::splitmix64(h ^ a);
    return detail::splitmix64(h ^ (b + 0x452821e638d01377ULL));
}

// Named purposes for substream derivation.
enum class StreamPurpose : std::uint64_t {
    sample_coordinate = 1,  // drawing X_j in collect(): substream_id(purpose, j)
    mean_estimate = 2,      // Monte Carlo E[T] fallback
    inner_conditional = 3,  // Monte Carlo inner conditional expectations
    validation = 4,         // decomposition validation draws
    oracle = 5,             // test-side oracles (windowed conditioning etc.)
    covariance = 6,         // Monte Carlo covariance cross-check
};

inline std::uint64_t substream_id(StreamPurpose p, std::uint64_t a = 0, std::uint64_t b = 0) {
    return substream_id(static_cast<std::uint64_t>(p), a, b);
}

}  // namespace stein
