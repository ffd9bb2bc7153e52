#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "privmc/eigsolve.hpp"
#include "privmc/privacy.hpp"
#include "privmc/rng.hpp"
#include "privmc/sparse.hpp"

namespace privmc {

// Streaming Oja estimate of the top eigenpair of A^T A with per-step
// Gaussian noise. Never forms the n x n gram matrix: working state is three
// length-n buffers plus the rows themselves, so memory stays O(n + nnz).
//
// sigma is injected by the caller: the standalone estimator calibrates it
// over its own gamma rounds, while the Frank-Wolfe oja backend calibrates
// over every inner step of every outer iteration. The step size is the
// noise-balancing eta = 1/(gamma * sigma * sqrt(n)); in the sigma = 0 test
// mode that expression is undefined and eta falls back to 1, which turns
// the loop into a plain normalized power-like iteration.
inline EigPair oja_iterate(const SparseRows& rows, double sigma, std::uint64_t gamma,
                           const RngStream& stream) {
  if (gamma == 0) throw std::invalid_argument("oja_iterate: gamma must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("oja_iterate: sigma must be >= 0");
  const std::size_t n = static_cast<std::size_t>(rows.ncols);
  if (n == 0) throw std::invalid_argument("oja_iterate: empty matrix");
  const double eta =
      sigma == 0.0 ? 1.0
                   : 1.0 / (static_cast<double>(gamma) * sigma *
                            std::sqrt(static_cast<double>(n)));

  std::vector<double> v(n), gram_v(n), g(n);

  // v0 ~ N(0, sigma^2 I), normalized. A zero draw (always at sigma = 0,
  // measure-zero otherwise) falls back to a unit-variance draw: the
  // direction is distributed identically and the guard keeps the iterate
  // well defined.
  {
    auto eng = stream.with("oja", 0, "init").engine();
    gaussian_fill(v, sigma, eng);
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    while (norm2 == 0.0) {
      gaussian_fill(v, 1.0, eng);
      norm2 = 0.0;
      for (double x : v) norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }

  for (std::uint64_t tau = 1; tau <= gamma; ++tau) {
    gram_matvec(rows, v, gram_v);
    auto eng = stream.with("oja", tau, "step-noise").engine();
    gaussian_fill(g, sigma, eng);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] += eta * (gram_v[i] + g[i]);
      norm2 += v[i] * v[i];
    }
    if (norm2 == 0.0)
      throw std::runtime_error("oja_iterate: iterate collapsed to zero");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }

  // lambda^2 = ||A v||^2 + one more Gaussian release, clamped at zero.
  double lambda2 = gram_quadratic_form(rows, v);
  {
    auto eng = stream.with("oja", 0, "lambda-noise").engine();
    double noise[1];
    gaussian_fill(noise, sigma, eng);
    lambda2 += noise[0];
  }

  EigPair out;
  out.v = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
  detail::fix_sign(out.v);
  out.lambda_hat = std::sqrt(std::max(0.0, lambda2));
  return out;
}

// Standalone private estimator: rows must already be clipped to L; the
// budget covers the gamma step releases plus the eigenvalue release.
inline EigPair private_oja(const SparseRows& rows, double L, const PrivacyParams& params,
                           std::uint64_t gamma, const RngStream& stream) {
  validate_params(params);
  const NoiseScale ns = noise_scale(Mechanism::oja, L, gamma, params);
  return oja_iterate(rows, ns.sigma, gamma, stream);
}

}  // namespace privmc
