#pragma once

// Platform-stable randomness. The std:: distributions are implementation
// defined, so every draw that ends up in a run record goes through these
// helpers instead.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace dynscale {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Immutable seed node. Child streams are derived by tag, so the seed used by
/// any single draw depends only on its position in the derivation tree and
/// never on scheduling order.
class SeedStream {
public:
    constexpr SeedStream() = default;
    explicit constexpr SeedStream(std::uint64_t seed) : state_(seed) {}

    SeedStream derive(std::uint64_t tag) const noexcept;
    SeedStream derive(std::string_view tag) const noexcept;

    constexpr std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0;
};

class Rng {
public:
    explicit Rng(SeedStream seed) noexcept : state_(seed.value()) {}
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept;
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    /// Uniform integer on [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;
    double normal(double mean, double stddev) noexcept;

    template <typename T>
    void shuffle(std::span<T> items) noexcept
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace dynscale
