#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

#include "privmc/eigsolve.hpp"
#include "privmc/observed.hpp"
#include "privmc/privacy.hpp"
#include "privmc/rng.hpp"

namespace privmc {

struct SvdConfig {
  Eigen::Index r = 1;  // subspace rank
  double L = 1.0;      // clip bound for the covariance release
  std::optional<double> sigma_override;  // test mode
  double subspace_tol = 1e-9;
  int subspace_max_sweeps = 1000;
};

// One-shot baseline: a single noisy covariance release, its top-r subspace
// V, and a per-user local projection. The covariance is built from rows
// clipped to L on the fly; the local step projects the user's raw observed
// row, scaled by (m*n)/|observed| to undo the sampling density:
//   row_hat_i = (m n / |Omega|) * row_i * V V^T.
// The result is returned in factored form (basis = columns of V, one
// r-vector of coefficients per user), so predictions never need the dense
// matrix.
inline FactoredModel run_private_svd(const ObservedMatrix& obs, const SvdConfig& cfg,
                                     const PrivacyParams& params,
                                     std::uint64_t master_seed) {
  const Eigen::Index n = obs.num_items();
  const std::size_t m = obs.num_users();
  if (cfg.r < 1 || cfg.r > n) throw std::invalid_argument("svd: need 1 <= r <= n");
  if (!(cfg.L > 0.0)) throw std::invalid_argument("svd: L must be > 0");
  if (obs.observed_count() == 0) throw std::invalid_argument("svd: no observed entries");

  double sigma = 0.0;
  if (cfg.sigma_override) {
    if (*cfg.sigma_override < 0.0) throw std::invalid_argument("svd: sigma_override < 0");
    sigma = *cfg.sigma_override;
  } else {
    validate_params(params);
    sigma = noise_scale(Mechanism::svd, cfg.L, 1, params).sigma;
  }

  // Covariance of the clipped rows. Clipping is a per-row scalar, so the
  // rank-one contribution just picks up the squared scale.
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t u = 0; u < m; ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    const double norm = obs.rows.row_norm(u);
    const double scale = norm > cfg.L ? cfg.L / norm : 1.0;
    const double s2 = scale * scale;
    for (std::size_t a = 0; a < cs.size(); ++a)
      for (std::size_t b = a; b < cs.size(); ++b)
        W(cs[a], cs[b]) += s2 * vs[a] * vs[b];
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) W(j, i) = W(i, j);

  const RngStream base{master_seed};
  W += symmetric_noise_matrix(n, sigma, base.with("svd", 0, "cov-noise"));
  SubspaceBasis sub = top_r_subspace(W, cfg.r, base.with("svd", 0, "subspace-init"),
                                     cfg.subspace_tol, cfg.subspace_max_sweeps);

  const double density_scale =
      static_cast<double>(m) * static_cast<double>(n) /
      static_cast<double>(obs.observed_count());

  FactoredModel model;
  model.num_users = m;
  model.num_items = n;
  model.nuclear_bound = 0.0;
  model.row_bound = cfg.L;
  model.means = obs.means;
  model.basis.reserve(cfg.r);
  for (Eigen::Index j = 0; j < cfg.r; ++j) model.basis.push_back(sub.V.col(j));
  model.coeffs.assign(m * static_cast<std::size_t>(cfg.r), 0.0);
  for (std::size_t u = 0; u < m; ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    double* c = model.coeffs.data() + u * static_cast<std::size_t>(cfg.r);
    for (Eigen::Index t = 0; t < cfg.r; ++t) {
      double dot = 0.0;
      const Eigen::VectorXd& col = model.basis[static_cast<std::size_t>(t)];
      for (std::size_t a = 0; a < cs.size(); ++a) dot += vs[a] * col[cs[a]];
      c[t] = density_scale * dot;
    }
  }
  return model;
}

}  // namespace privmc
