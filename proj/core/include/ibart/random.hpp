#pragma once

#include <cstdint>
#include <random>

namespace ibart {

/// Seeded random generator owned by a single chain. All samplers are
/// implemented here rather than via std:: distributions so that a given seed
/// produces the same stream on every build of the project.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [0, n).
  int uniform_int(int n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() ;

  /// Gamma(shape, rate) via Marsaglia-Tsang, with the power boost for shape < 1.
  double gamma(double shape, double rate);

  /// Poisson(rate): sequential inversion below rate 30, Hormann's PTRS above.
  int poisson(double rate);

  bool bernoulli(double p) { return uniform() < p; }

  /// Bernoulli with P(true) = 1/(1 + exp(-logit)), computed stably.
  bool bernoulli_logit(double logit);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Splits one master seed into independent per-worker seeds (splitmix64 step).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

}  // namespace ibart
