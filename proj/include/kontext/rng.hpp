#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace kontext {

/// Seeded random stream whose outputs are identical on every platform.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so every derived draw is implemented here.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound)
  {
    // [threshold, 2^64) holds an exact multiple of bound values.
    std::uint64_t const threshold = (std::uint64_t{0} - bound) % bound;
    std::uint64_t       x         = engine_();
    while (x < threshold)
    {
      x = engine_();
    }
    return x % bound;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }

  double normal()
  {
    if (has_spare_)
    {
      has_spare_ = false;
      return spare_;
    }
    double const r     = std::sqrt(-2.0 * std::log(uniform_open_low()));
    double const theta = 2.0 * std::numbers::pi * uniform();
    spare_             = r * std::sin(theta);
    has_spare_         = true;
    return r * std::cos(theta);
  }

  /// Standard exponential draw; normalised blocks of these are Dirichlet(1).
  double exponential() { return -std::log(uniform_open_low()); }

  template <typename T>
  void shuffle(std::vector<T> &items)
  {
    for (std::size_t i = items.size(); i > 1; --i)
    {
      std::size_t const j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
  double          spare_     = 0.0;
  bool            has_spare_ = false;
};

}  // namespace kontext
