#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nmespf {

constexpr double kHalfPi = 1.57079632679489661923;

struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    double norm() const { return std::sqrt(x1 * x1 + x2 * x2); }

    Vec2 operator+(const Vec2& o) const { return {x1 + o.x1, x2 + o.x2}; }
    Vec2 operator-(const Vec2& o) const { return {x1 - o.x1, x2 - o.x2}; }
    Vec2 operator*(double a) const { return {a * x1, a * x2}; }
};

inline Vec2 operator*(double a, const Vec2& v) { return v * a; }

inline bool finite(const Vec2& v) { return std::isfinite(v.x1) && std::isfinite(v.x2); }

// Deterministic RNG (splitmix64). std::uniform_real_distribution is
// implementation-defined, which would break byte-identical CSV output
// across toolchains, so all randomness goes through this.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  private:
    std::uint64_t state_;
};

// Shortest round-trip decimal form; used for every float that lands in a
// CSV or summary so that repeated runs are byte-identical.
inline std::string format_double(double v) {
    std::array<char, 40> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                             std::chars_format::general);
    if (res.ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf.data(), res.ptr);
}

}  // namespace nmespf
