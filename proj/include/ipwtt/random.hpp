#ifndef IPWTT_RANDOM_HPP
#define IPWTT_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "ipwtt/error.hpp"
#include "ipwtt/normal.hpp"

namespace ipwtt {

/// Per-replication random stream: std::mt19937_64 seeded through
/// std::seed_seq with the 32-bit halves of (seed, stream index). Uniforms
/// take the top 53 bits and sit at cell midpoints, so they lie strictly
/// inside (0,1).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(make_engine(seed, stream)) {}

  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
  }
  std::mt19937_64 engine_;
};

enum class Distribution { StdNormal, UnitLaplace };

inline std::string_view to_string(Distribution d) {
  return d == Distribution::StdNormal ? "normal" : "laplace";
}

inline Distribution parse_distribution(std::string_view s) {
  if (s == "normal" || s == "gaussian") return Distribution::StdNormal;
  if (s == "laplace") return Distribution::UnitLaplace;
  throw DomainError("unknown distribution '" + std::string(s) + "'");
}

/// Unit-variance Laplace CDF, scale 1/sqrt(2).
inline double laplace_cdf(double x) {
  return x <= 0.0 ? 0.5 * std::exp(std::numbers::sqrt2 * x)
                  : 1.0 - 0.5 * std::exp(-std::numbers::sqrt2 * x);
}

inline double laplace_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("laplace_quantile: u outside (0,1)");
  return u < 0.5 ? std::log(2.0 * u) / std::numbers::sqrt2
                 : -std::log(2.0 * (1.0 - u)) / std::numbers::sqrt2;
}

inline double dist_cdf(Distribution d, double x) {
  return d == Distribution::StdNormal ? normal_cdf(x) : laplace_cdf(x);
}

/// One variate by inverse CDF of one uniform.
inline double draw(Distribution d, RandomStream& rng) {
  const double u = rng.uniform();
  return d == Distribution::StdNormal ? normal_quantile(u) : laplace_quantile(u);
}

}  // namespace ipwtt

#endif  // IPWTT_RANDOM_HPP
