#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "privmc/eigsolve.hpp"
#include "privmc/observed.hpp"
#include "privmc/oja.hpp"
#include "privmc/parallel.hpp"
#include "privmc/privacy.hpp"
#include "privmc/rng.hpp"
#include "privmc/sparse.hpp"

namespace privmc {

// Rank-one-per-iteration model: T shared unit basis vectors plus one
// coefficient row per user. Row i of the completed matrix is
// sum_t coeffs[i][t] * basis[t], in centered space; means[i] is added back
// at prediction time. The per-row projection multiplies a whole coefficient
// row by one scalar, so this form is closed under every training step and
// the m x n matrix never needs to exist.
struct FactoredModel {
  std::uint64_t num_users = 0;
  Eigen::Index num_items = 0;
  double nuclear_bound = 0.0;  // k
  double row_bound = 0.0;      // L
  std::vector<Eigen::VectorXd> basis;
  std::vector<double> coeffs;  // num_users x rank(), row-major
  std::vector<double> means;

  std::size_t rank() const { return basis.size(); }

  std::span<const double> coeff_row(std::uint64_t u) const {
    return {coeffs.data() + u * rank(), rank()};
  }

  double centered_value(std::uint64_t u, Eigen::Index j) const {
    const std::size_t r = rank();
    const double* c = coeffs.data() + u * r;
    double y = 0.0;
    for (std::size_t t = 0; t < r; ++t) y += c[t] * basis[t][j];
    return y;
  }
};

struct GlobalBroadcast {
  Eigen::VectorXd v;           // unit direction, shared by all users
  double lambda_prime = 0.0;   // inflated eigenvalue estimate
  std::uint64_t t = 0;         // 1-based outer iteration
};

// lambda' = lambda + sqrt(sigma * ln(n/beta)) * n^(1/4). The inflation keeps
// the broadcast denominator above the top singular value of the noisy
// residual with probability 1-beta, which is what caps every ||u_hat|| at 1.
inline double lambda_prime(double lambda_hat, double sigma, Eigen::Index n,
                           double beta) {
  if (!(beta > 0.0) || beta >= static_cast<double>(n))
    throw std::invalid_argument("lambda_prime: need 0 < beta < n");
  if (sigma < 0.0) throw std::invalid_argument("lambda_prime: sigma must be >= 0");
  return lambda_hat +
         std::sqrt(sigma * std::log(static_cast<double>(n) / beta)) *
             std::pow(static_cast<double>(n), 0.25);
}

struct FwConfig {
  double k = 1.0;       // nuclear-norm budget
  std::uint64_t T = 1;  // outer iterations
  double L = 1.0;       // row bound the observed rows were clipped to
  double beta = 0.01;   // confidence for the eigenvalue inflation
  enum class Backend { exact, oja } backend = Backend::exact;
  std::uint64_t gamma = 100;       // inner steps of the oja backend
  bool recalibrate_noise = false;  // optional increasing-noise schedule
  // Test hook: fixes sigma directly (0 disables noise) and skips budget
  // validation. Production paths leave it empty.
  std::optional<double> sigma_override;
  double eig_tol = 1e-9;
  int eig_max_iter = 1000;
};

struct FwDiagnostics {
  int eig_not_converged = 0;
  int u_norm_violations = 0;  // iterations where sum_i u_hat_i^2 > 1
};

// One user's reaction to a broadcast: a pure function of the user's own
// (items, observed) row, the running local state, and broadcast values.
//   u_hat   = <current - observed, v> / lambda'
//   c_new   = -(k/T) u_hat, appended after decaying earlier coefficients
//   row     scaled onto the L-ball if the reconstructed observed entries
//           exceed it (one scalar for coefficients and cached values alike)
// coeff must be the first bc.t slots of the user's row; current caches the
// reconstruction on the user's own items and is updated in place. Returns
// u_hat. A non-positive lambda' (possible only in sigma = 0 mode with a
// zero residual) skips the iteration entirely.
inline double fw_local_update(std::span<const Eigen::Index> items,
                              std::span<const double> observed,
                              std::span<double> coeff, std::span<double> current,
                              const GlobalBroadcast& bc, double k, std::uint64_t T,
                              double L) {
  if (coeff.size() != bc.t || current.size() != items.size() ||
      observed.size() != items.size())
    throw std::invalid_argument("fw_local_update: size mismatch");
  if (!(bc.lambda_prime > 0.0)) return 0.0;

  double dot = 0.0;
  for (std::size_t j = 0; j < items.size(); ++j)
    dot += (current[j] - observed[j]) * bc.v[items[j]];
  const double u_hat = dot / bc.lambda_prime;

  const double decay = 1.0 - 1.0 / static_cast<double>(T);
  const double c_new = -(k / static_cast<double>(T)) * u_hat;
  double norm2 = 0.0;
  for (std::size_t j = 0; j < items.size(); ++j) {
    current[j] = decay * current[j] + c_new * bc.v[items[j]];
    norm2 += current[j] * current[j];
  }
  for (std::size_t t = 0; t + 1 < coeff.size(); ++t) coeff[t] *= decay;
  coeff[bc.t - 1] = c_new;

  const double norm = std::sqrt(norm2);
  if (norm > L) {
    const double scale = L / norm;
    for (double& c : coeff) c *= scale;
    for (double& y : current) y *= scale;
  }
  return u_hat;
}

// Standalone form of the same projection for a finished coefficient row:
// reconstructs the user's observed entries from scratch and rescales the
// row if they overflow the L-ball. Returns the applied scale (1 when the
// row was already inside, which also makes the map idempotent bit for bit).
inline double project_row_factored(std::span<double> coeff,
                                   const std::vector<Eigen::VectorXd>& basis,
                                   std::span<const Eigen::Index> omega, double L) {
  if (coeff.size() > basis.size())
    throw std::invalid_argument("project_row_factored: more coefficients than basis");
  if (!(L > 0.0)) throw std::invalid_argument("project_row_factored: L must be > 0");
  double norm2 = 0.0;
  for (const Eigen::Index j : omega) {
    double y = 0.0;
    for (std::size_t t = 0; t < coeff.size(); ++t) y += coeff[t] * basis[t][j];
    norm2 += y * y;
  }
  const double norm = std::sqrt(norm2);
  if (norm <= L) return 1.0;
  const double scale = L / norm;
  for (double& c : coeff) c *= scale;
  return scale;
}

using FwObserver = std::function<void(std::uint64_t t, const FactoredModel&)>;

namespace detail {

struct FwRun {
  const ObservedMatrix& obs;
  const FwConfig& cfg;
  FactoredModel model;
  SparseRows residual;           // current - observed, rebuilt every iteration
  std::vector<double> current;   // reconstruction on each user's items
  std::vector<double> u_hats;    // scratch, one per user

  explicit FwRun(const ObservedMatrix& obs_, const FwConfig& cfg_)
      : obs(obs_), cfg(cfg_) {
    if (cfg.T == 0) throw std::invalid_argument("frank-wolfe: T must be >= 1");
    if (cfg.k < 0.0) throw std::invalid_argument("frank-wolfe: k must be >= 0");
    if (!(cfg.L > 0.0)) throw std::invalid_argument("frank-wolfe: L must be > 0");
    for (std::size_t u = 0; u < obs.num_users(); ++u)
      if (obs.rows.row_norm(u) > cfg.L * (1.0 + 1e-9))
        throw std::invalid_argument(
            "frank-wolfe: observed row exceeds the declared bound; clip first");
    model.num_users = obs.num_users();
    model.num_items = obs.num_items();
    model.nuclear_bound = cfg.k;
    model.row_bound = cfg.L;
    model.means = obs.means;
    model.basis.reserve(cfg.T);
    model.coeffs.assign(obs.num_users() * cfg.T, 0.0);
    residual = obs.rows;
    current.assign(obs.rows.nnz(), 0.0);
    u_hats.assign(obs.num_users(), 0.0);
  }

  void refresh_residual() {
    for (std::size_t p = 0; p < current.size(); ++p)
      residual.vals[p] = current[p] - obs.rows.vals[p];
  }

  void apply_broadcast(const GlobalBroadcast& bc, FwDiagnostics* diag) {
    model.basis.push_back(bc.v);
    const std::uint64_t t = bc.t;
    for_each_chunk(obs.num_users(), 4096, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t u = b; u < e; ++u) {
        const std::size_t lo = obs.rows.offsets[u], hi = obs.rows.offsets[u + 1];
        u_hats[u] = fw_local_update(
            obs.rows.row_cols(u), obs.rows.row_vals(u),
            {model.coeffs.data() + u * cfg.T, t},
            {current.data() + lo, hi - lo}, bc, cfg.k, cfg.T, cfg.L);
      }
    });
    if (diag) {
      double total = 0.0;
      for (double u : u_hats) total += u * u;
      if (total > 1.0 + 1e-9) ++diag->u_norm_violations;
    }
  }

};

}  // namespace detail

// T rounds of the joint loop. Each round: residuals of the current iterate
// are accumulated into a covariance (global, noised with the per-release
// sigma), the top eigenpair is extracted and inflated, and the broadcast is
// applied by every user locally. With the oja backend the covariance is
// never formed: each round runs gamma noisy streaming steps instead, with
// sigma calibrated over all T*gamma releases.
inline FactoredModel run_private_fw(const ObservedMatrix& obs, const FwConfig& cfg,
                                    const PrivacyParams& params,
                                    std::uint64_t master_seed,
                                    FwDiagnostics* diag = nullptr,
                                    const FwObserver& observer = {}) {
  detail::FwRun run(obs, cfg);
  const Eigen::Index n = obs.num_items();
  const RngStream base{master_seed};

  double sigma_uniform = 0.0;
  double sigma_oja = 0.0;
  if (!cfg.sigma_override) validate_params(params);
  if (cfg.sigma_override) {
    if (*cfg.sigma_override < 0.0)
      throw std::invalid_argument("frank-wolfe: sigma_override must be >= 0");
    sigma_uniform = sigma_oja = *cfg.sigma_override;
  } else if (cfg.backend == FwConfig::Backend::exact) {
    if (!cfg.recalibrate_noise)
      sigma_uniform = noise_scale(Mechanism::fw, cfg.L, cfg.T, params).sigma;
  } else {
    sigma_oja = noise_scale(Mechanism::oja, cfg.L, cfg.T * cfg.gamma, params).sigma;
  }
  if (cfg.recalibrate_noise && cfg.backend != FwConfig::Backend::exact)
    throw std::invalid_argument("frank-wolfe: noise schedule requires the exact backend");

  for (std::uint64_t t = 1; t <= cfg.T; ++t) {
    run.refresh_residual();
    EigPair top;
    double sigma_t = 0.0;
    if (cfg.backend == FwConfig::Backend::exact) {
      sigma_t = sigma_uniform;
      if (cfg.recalibrate_noise && !cfg.sigma_override)
        sigma_t = scheduled_noise_sigma(Mechanism::fw, cfg.L, t, cfg.T, params);
      Eigen::MatrixXd W = covariance_accumulate(run.residual);
      W += symmetric_noise_matrix(n, sigma_t, base.with("fw", t, "cov-noise"));
      top = top_eig_exact(W, cfg.eig_tol, cfg.eig_max_iter,
                          base.with("fw", t, "eig-init"));
    } else {
      sigma_t = sigma_oja;
      const RngStream inner{RngStream::derive_master(master_seed, "fw-oja", t)};
      top = oja_iterate(run.residual, sigma_oja, cfg.gamma, inner);
    }
    if (diag && !top.converged) ++diag->eig_not_converged;

    GlobalBroadcast bc{std::move(top.v),
                       lambda_prime(top.lambda_hat, sigma_t, n, cfg.beta), t};
    run.apply_broadcast(bc, diag);
    if (observer) observer(t, run.model);
  }
  return std::move(run.model);
}

// Noise-free variant: exact top eigenpair of the residual covariance each
// round, no eigenvalue inflation, no row projection. Uses the same stream
// labels for the power-iteration starts as the private loop, so a private
// run with sigma_override = 0 and a loose L produces bit-identical
// broadcasts.
inline FactoredModel run_nonprivate_fw(const ObservedMatrix& obs, double k,
                                       std::uint64_t T, std::uint64_t master_seed = 0,
                                       double eig_tol = 1e-9, int eig_max_iter = 1000) {
  if (T == 0) throw std::invalid_argument("frank-wolfe: T must be >= 1");
  if (k < 0.0) throw std::invalid_argument("frank-wolfe: k must be >= 0");
  FactoredModel model;
  model.num_users = obs.num_users();
  model.num_items = obs.num_items();
  model.nuclear_bound = k;
  model.row_bound = obs.L;
  model.means = obs.means;
  model.basis.reserve(T);
  model.coeffs.assign(obs.num_users() * T, 0.0);

  SparseRows residual = obs.rows;
  std::vector<double> current(obs.rows.nnz(), 0.0);
  const RngStream base{master_seed};
  const double decay = 1.0 - 1.0 / static_cast<double>(T);

  for (std::uint64_t t = 1; t <= T; ++t) {
    for (std::size_t p = 0; p < current.size(); ++p)
      residual.vals[p] = current[p] - obs.rows.vals[p];
    Eigen::MatrixXd W = covariance_accumulate(residual);
    EigPair top = top_eig_exact(W, eig_tol, eig_max_iter, base.with("fw", t, "eig-init"));
    model.basis.push_back(top.v);
    if (!(top.lambda_hat > 0.0)) continue;  // zero residual: nothing to add

    for_each_chunk(obs.num_users(), 4096, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t u = b; u < e; ++u) {
        const std::size_t lo = obs.rows.offsets[u], hi = obs.rows.offsets[u + 1];
        const auto cs = obs.rows.row_cols(u);
        double dot = 0.0;
        for (std::size_t j = 0; j < cs.size(); ++j)
          dot += (current[lo + j] - obs.rows.vals[lo + j]) * top.v[cs[j]];
        const double u_hat = dot / top.lambda_hat;
        const double c_new = -(k / static_cast<double>(T)) * u_hat;
        for (std::size_t j = 0; j < cs.size(); ++j)
          current[lo + j] = decay * current[lo + j] + c_new * top.v[cs[j]];
        double* coeff = model.coeffs.data() + u * T;
        for (std::uint64_t s = 0; s + 1 < t; ++s) coeff[s] *= decay;
        coeff[t - 1] = c_new;
      }
    });
  }
  return model;
}

// Iteration-count heuristics. "empirical" follows the tuning that works at
// survey scale, k^(4/5) eps^(2/5) / (n^(1/5) L^(4/5)); "generalization"
// balances the optimization and generalization error terms,
// k^(4/3) / (|Omega| (m+n))^(1/3). Both round to the nearest integer and
// never return less than 1.
enum class SuggestTMode { empirical, generalization };

inline std::uint64_t suggest_T(SuggestTMode mode, double k, double eps, double n,
                               double L, double omega_size, double m) {
  double raw = 0.0;
  if (mode == SuggestTMode::empirical) {
    if (!(k > 0.0) || !(eps > 0.0) || !(n > 0.0) || !(L > 0.0))
      throw std::invalid_argument("suggest_T: empirical mode needs k, eps, n, L > 0");
    raw = std::pow(k, 0.8) * std::pow(eps, 0.4) /
          (std::pow(n, 0.2) * std::pow(L, 0.8));
  } else {
    if (!(k > 0.0) || !(omega_size > 0.0) || !(m + n > 0.0))
      throw std::invalid_argument("suggest_T: generalization mode needs k, |Omega|, m+n > 0");
    raw = std::pow(k, 4.0 / 3.0) / std::cbrt(omega_size * (m + n));
  }
  const double rounded = std::llround(raw);
  return rounded < 1.0 ? 1 : static_cast<std::uint64_t>(rounded);
}

}  // namespace privmc
