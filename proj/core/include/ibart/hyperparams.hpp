#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ibart {

enum class Mode { infinite, classic };

inline std::string to_string(Mode m) { return m == Mode::infinite ? "infinite" : "classic"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "infinite") return Mode::infinite;
  if (s == "classic") return Mode::classic;
  throw std::invalid_argument("unknown mode: " + s);
}

/// Model and sampler hyperparameters with the default values used throughout.
/// sigma_mu2 <= 0 means "derive from k_ref": sigma_mu = 0.5 / (2 sqrt(k_ref)),
/// and in classic mode k_ref follows classic_k unless set explicitly.
struct HyperParams {
  double alpha = 0.95;     // branching prior: P(split at depth d) = alpha (1+d)^-beta
  double beta = 2.0;
  double sigma_mu2 = 0.0;  // leaf prior variance; derived when <= 0
  double k_ref = 10.0;
  double nu = 3.0;    // sigma^2 ~ nu lambda / chi^2_nu
  double lambda = 0.74;  // stated in original response units; the sampler
                         // divides by y_scale^2 to move it onto the
                         // standardized scale
  double a_gamma = 0.05, b_gamma = 0.01;
  double a_eta = 0.05, b_eta = 0.01;
  double a_delta = 0.1, b_delta = 0.01;
  int iterations = 5000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  Mode mode = Mode::infinite;
  int classic_k = 200;
  bool k_ref_explicit = false;

  double effective_sigma_mu2() const {
    if (sigma_mu2 > 0.0) return sigma_mu2;
    const double kr = (mode == Mode::classic && !k_ref_explicit)
                          ? static_cast<double>(classic_k)
                          : k_ref;
    const double s = 0.5 / (2.0 * std::sqrt(kr));
    return s * s;
  }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    if (!(k_ref > 0.0)) throw std::invalid_argument("k_ref must be positive");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(a_gamma > 0.0 && b_gamma > 0.0 && a_eta > 0.0 && b_eta > 0.0 && a_delta > 0.0 &&
          b_delta > 0.0))
      throw std::invalid_argument("hyper-prior shapes and rates must be positive");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
    if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (mode == Mode::classic && classic_k < 1)
      throw std::invalid_argument("classic mode needs trees >= 1");
  }
};

}  // namespace ibart
