#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "privmc/observed.hpp"
#include "privmc/privacy.hpp"
#include "privmc/rng.hpp"

namespace privmc {

// Euclidean projection of a sorted non-negative spectrum onto the simplex
// slice {z : z_i >= 0, sum z_i <= k}: water-filling. Find the largest j with
// lambda_j > (prefix_j - k)/j; that quotient is the water level tau and
// z_i = max(0, lambda_i - tau). When the spectrum already fits, tau = 0 and
// the input comes back unchanged, so sum z = min(k, sum lambda) exactly.
inline std::vector<double> nuclear_project(const std::vector<double>& lambda, double k) {
  if (!(k >= 0.0)) throw std::invalid_argument("nuclear_project: k must be >= 0");
  double sum = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0)
      throw std::invalid_argument("nuclear_project: negative eigenvalue");
    if (i > 0 && lambda[i] > lambda[i - 1])
      throw std::invalid_argument("nuclear_project: spectrum must be sorted descending");
    sum += lambda[i];
  }
  if (sum <= k) return lambda;

  // Feasibility must be non-strict: at k = 0 the first level ties the top
  // eigenvalue exactly and the whole spectrum has to drain to zero. Ties at
  // larger support sizes reproduce the same tau, so >= never changes a k > 0
  // answer.
  double prefix = 0.0, tau = 0.0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    prefix += lambda[j];
    const double level = (prefix - k) / static_cast<double>(j + 1);
    if (lambda[j] >= level) tau = level;  // still feasible at this support size
  }
  std::vector<double> z(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) z[i] = std::max(0.0, lambda[i] - tau);
  return z;
}

// Dense completion result for the projected-gradient baseline.
struct DenseModel {
  Eigen::MatrixXd values;  // centered predictions, m x n
  Eigen::Index num_items = 0;
  std::vector<double> means;

  double centered_value(std::uint64_t u, Eigen::Index j) const {
    return values(static_cast<Eigen::Index>(u), j);
  }
};

struct PgdConfig {
  double k = 1.0;       // nuclear-norm budget
  std::uint64_t T = 1;  // iterations
  double L = 1.0;       // row bound backing the covariance sensitivity
  enum class EtaMode { constant, inv_sqrt, inv_t } eta_mode = EtaMode::constant;
  double eta = 1.0;  // step size for the constant mode
  std::optional<double> sigma_override;  // test mode
};

// Noisy projected gradient descent, desk scale only: the iterate is a dense
// m x n matrix. Each iteration takes a descent step on the observed entries,
//   Y <- Y - eta_t * P_Omega(Y - Y*),
// releases W = Y^T Y plus symmetric noise, and re-synthesizes the iterate
// inside the nuclear ball from the noisy spectrum: eigenvalues come back as
// Lambda = sqrt(max(0, eig)), the left factor is recovered as
// U = Y V Lambda^{-1} (columns with Lambda_i < 1e-8 * Lambda_max dropped),
// and the water-filled spectrum replaces Lambda. When the spectrum already
// fits inside the ball the projection is inactive and the iterate is kept
// as is rather than being round-tripped through the noisy basis.
inline DenseModel run_private_pgd(const ObservedMatrix& obs, const PgdConfig& cfg,
                                  const PrivacyParams& params,
                                  std::uint64_t master_seed) {
  const Eigen::Index n = obs.num_items();
  const Eigen::Index m = static_cast<Eigen::Index>(obs.num_users());
  if (cfg.T == 0) throw std::invalid_argument("pgd: T must be >= 1");
  if (!(cfg.k >= 0.0)) throw std::invalid_argument("pgd: k must be >= 0");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("pgd: eta must be > 0");

  double sigma = 0.0;
  if (cfg.sigma_override) {
    if (*cfg.sigma_override < 0.0) throw std::invalid_argument("pgd: sigma_override < 0");
    sigma = *cfg.sigma_override;
  } else {
    validate_params(params);
    sigma = noise_scale(Mechanism::pgd, cfg.L, cfg.T, params).sigma;
  }

  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(m, n);
  const RngStream base{master_seed};

  for (std::uint64_t t = 1; t <= cfg.T; ++t) {
    double eta = cfg.eta;
    if (cfg.eta_mode == PgdConfig::EtaMode::inv_sqrt)
      eta = 1.0 / std::sqrt(static_cast<double>(t));
    else if (cfg.eta_mode == PgdConfig::EtaMode::inv_t)
      eta = 1.0 / static_cast<double>(t);

    for (std::size_t u = 0; u < obs.num_users(); ++u) {
      const auto cs = obs.rows.row_cols(u);
      const auto vs = obs.rows.row_vals(u);
      for (std::size_t a = 0; a < cs.size(); ++a) {
        double& y = Y(static_cast<Eigen::Index>(u), cs[a]);
        y -= eta * (y - vs[a]);
      }
    }

    Eigen::MatrixXd W = Y.transpose() * Y;
    W += symmetric_noise_matrix(n, sigma, base.with("pgd", t, "cov-noise"));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("pgd: eigendecomposition failed");

    // Eigen reports eigenvalues ascending; flip to descending.
    std::vector<double> lambda(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      lambda[static_cast<std::size_t>(i)] =
          std::sqrt(std::max(0.0, eig.eigenvalues()[n - 1 - i]));

    double total = 0.0;
    for (double l : lambda) total += l;
    if (total <= cfg.k) continue;  // projection inactive

    const std::vector<double> z = nuclear_project(lambda, cfg.k);
    const double lambda_max = lambda.empty() ? 0.0 : lambda[0];
    const double floor = 1e-8 * lambda_max;

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double li = lambda[static_cast<std::size_t>(i)];
      if (li < floor) continue;  // direction unidentifiable, drop it
      const Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - i);
      const Eigen::VectorXd u_col = (Y * v) / li;
      next.noalias() += (z[static_cast<std::size_t>(i)] * u_col) * v.transpose();
    }
    Y = std::move(next);
  }

  DenseModel model;
  model.values = std::move(Y);
  model.num_items = n;
  model.means = obs.means;
  return model;
}

}  // namespace privmc
