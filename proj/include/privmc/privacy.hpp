#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace privmc {

// User-level (eps, delta) differential privacy budget. The whole budget
// covers the full run of an algorithm; composition over its rounds is baked
// into the noise formulas below, not tracked at runtime.
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Rejects budgets outside the regime the Gaussian-mechanism calibration is
// valid for. The eps <= 2 ln(1/delta) bound is required by the calibration
// and is checked as written (boundary accepted).
inline void validate_params(const PrivacyParams& p) {
  if (!(p.epsilon > 0.0))
    throw std::invalid_argument("privacy: epsilon must be > 0, got " +
                                std::to_string(p.epsilon));
  if (!(p.delta > 0.0) || !(p.delta < 1.0))
    throw std::invalid_argument("privacy: delta must lie in (0, 1), got " +
                                std::to_string(p.delta));
  if (p.epsilon > 2.0 * std::log(1.0 / p.delta))
    throw std::invalid_argument(
        "privacy: epsilon exceeds 2*ln(1/delta) (epsilon=" +
        std::to_string(p.epsilon) + ", 2*ln(1/delta)=" +
        std::to_string(2.0 * std::log(1.0 / p.delta)) + ")");
}

inline bool params_valid(const PrivacyParams& p) {
  return p.epsilon > 0.0 && p.delta > 0.0 && p.delta < 1.0 &&
         p.epsilon <= 2.0 * std::log(1.0 / p.delta);
}

enum class Mechanism { fw, oja, svd, pgd };

inline const char* mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::fw: return "fw";
    case Mechanism::oja: return "oja";
    case Mechanism::svd: return "svd";
    case Mechanism::pgd: return "pgd";
  }
  return "?";
}

struct NoiseScale {
  double sigma = 0.0;
  Mechanism mechanism = Mechanism::fw;
  std::uint64_t rounds = 1;
};

// Per-entry Gaussian standard deviation for one covariance (or eigenvalue)
// release, with the composition over `rounds` releases already folded in.
// L is the row-norm bound, so the covariance sensitivity is 4L^2; natural
// logs throughout.
//
//   fw / pgd : L^2 sqrt(64 * rounds * ln(1/delta)) / eps
//   svd      : L^2 sqrt(64 * ln(1/delta)) / eps           (single release)
//   oja      : L^2 sqrt(256 * rounds * ln(2/delta)) / eps
//
// The oja constant is larger than fw's; both are implemented exactly as
// stated for their mechanism.
inline NoiseScale noise_scale(Mechanism mech, double L, std::uint64_t rounds,
                              const PrivacyParams& p) {
  // Only what the formula itself needs; the eps <= 2 ln(1/delta) gate is the
  // caller's contract (the training entry points check it).
  if (!(p.epsilon > 0.0) || !(p.delta > 0.0) || !(p.delta < 1.0))
    throw std::invalid_argument("noise_scale: need epsilon > 0 and delta in (0, 1)");
  if (!(L > 0.0)) throw std::invalid_argument("noise_scale: L must be > 0");
  if (rounds == 0) throw std::invalid_argument("noise_scale: rounds must be >= 1");
  const double L2 = L * L;
  const double r = static_cast<double>(rounds);
  double sigma = 0.0;
  switch (mech) {
    case Mechanism::fw:
    case Mechanism::pgd:
      sigma = L2 * std::sqrt(64.0 * r * std::log(1.0 / p.delta)) / p.epsilon;
      break;
    case Mechanism::svd:
      sigma = L2 * std::sqrt(64.0 * std::log(1.0 / p.delta)) / p.epsilon;
      break;
    case Mechanism::oja:
      sigma = L2 * std::sqrt(256.0 * r * std::log(2.0 / p.delta)) / p.epsilon;
      break;
  }
  return NoiseScale{sigma, mech, rounds};
}

// Harmonic-weighted variant used by the optional "recalibrate as you go"
// schedule: iteration t of T gets sigma_t = L^2 sqrt(64 t H_T ln(1/delta))/eps
// where H_T is the T-th harmonic number. Sum of 1/sigma_t^2 matches the
// uniform schedule exactly, so the overall budget is unchanged.
inline double scheduled_noise_sigma(Mechanism mech, double L, std::uint64_t t,
                                    std::uint64_t T, const PrivacyParams& p) {
  if (mech != Mechanism::fw && mech != Mechanism::pgd)
    throw std::invalid_argument("scheduled_noise_sigma: only fw/pgd schedules");
  if (t == 0 || t > T) throw std::invalid_argument("scheduled_noise_sigma: need 1 <= t <= T");
  if (!(p.epsilon > 0.0) || !(p.delta > 0.0) || !(p.delta < 1.0))
    throw std::invalid_argument("scheduled_noise_sigma: need epsilon > 0 and delta in (0, 1)");
  double harmonic = 0.0;
  for (std::uint64_t s = 1; s <= T; ++s) harmonic += 1.0 / static_cast<double>(s);
  return L * L *
         std::sqrt(64.0 * static_cast<double>(t) * harmonic * std::log(1.0 / p.delta)) /
         p.epsilon;
}

}  // namespace privmc
