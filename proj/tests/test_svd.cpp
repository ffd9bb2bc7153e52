#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "privmc/metrics.hpp"
#include "privmc/svd_completion.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

// Observed matrix with explicit per-row item lists, zero means, loose L.
privmc::ObservedMatrix observed_entries(
    const Eigen::MatrixXd& Y, const std::vector<std::vector<Eigen::Index>>& omega,
    double L) {
  privmc::ObservedMatrix obs;
  obs.rows.ncols = Y.cols();
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    for (Eigen::Index j : omega[static_cast<std::size_t>(i)]) {
      obs.rows.cols.push_back(j);
      obs.rows.vals.push_back(Y(i, j));
    }
    obs.rows.offsets.push_back(obs.rows.cols.size());
  }
  obs.means.assign(static_cast<std::size_t>(Y.rows()), 0.0);
  obs.L = L;
  return obs;
}

std::vector<std::vector<Eigen::Index>> full_mask(Eigen::Index m, Eigen::Index n) {
  std::vector<std::vector<Eigen::Index>> omega(static_cast<std::size_t>(m));
  for (auto& row : omega)
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(j);
  return omega;
}

Eigen::MatrixXd random_low_rank(Eigen::Index m, Eigen::Index n, Eigen::Index rank,
                                unsigned seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd U(m, rank), V(n, rank);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index t = 0; t < rank; ++t) U(i, t) = unif(eng);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index t = 0; t < rank; ++t) V(j, t) = unif(eng);
  return U * V.transpose();
}

}  // namespace

TEST_CASE("noise-free fully observed rank-one data comes back exactly") {
  // With every entry observed the density correction is 1 and the top
  // subspace of the covariance is the row span itself, so the projection
  // changes nothing.
  const Eigen::Index m = 12, n = 6;
  const Eigen::MatrixXd Y = random_low_rank(m, n, 1, 404u);
  const auto obs = observed_entries(Y, full_mask(m, n), 1e9);

  privmc::SvdConfig cfg;
  cfg.r = 1;
  cfg.L = 1e9;
  cfg.sigma_override = 0.0;
  cfg.subspace_tol = 1e-13;

  const auto model = privmc::run_private_svd(obs, cfg, {}, 7u);
  REQUIRE(model.rank() == 1);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      REQUIRE_THAT(model.centered_value(static_cast<std::uint64_t>(i), j),
                   WithinAbs(Y(i, j), 1e-8));
}

TEST_CASE("half-observed data doubles the local coefficients") {
  // 4 x 4 with two observations per row: m*n/|observed| = 2 exactly, and the
  // coefficient of basis t is exactly 2 * <row, v_t> as computed over the
  // observed entries.
  const Eigen::Index m = 4, n = 4;
  const Eigen::MatrixXd Y = random_low_rank(m, n, 2, 11u);
  std::vector<std::vector<Eigen::Index>> omega{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  const auto obs = observed_entries(Y, omega, 1e9);
  REQUIRE(obs.observed_count() * 2 == static_cast<std::size_t>(m * n));

  privmc::SvdConfig cfg;
  cfg.r = 2;
  cfg.L = 1e9;
  cfg.sigma_override = 0.0;

  const auto model = privmc::run_private_svd(obs, cfg, {}, 7u);
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    for (Eigen::Index t = 0; t < cfg.r; ++t) {
      double dot = 0.0;
      const Eigen::VectorXd& col = model.basis[static_cast<std::size_t>(t)];
      for (std::size_t a = 0; a < cs.size(); ++a) dot += vs[a] * col[cs[a]];
      REQUIRE(model.coeff_row(u)[static_cast<std::size_t>(t)] == 2.0 * dot);
    }
  }
}

TEST_CASE("noise-free completion matches a dense reference") {
  // Rank-2 ground truth, 6 of 10 items per row. Reference: eigenvectors of
  // the observed covariance from a dense solver, predictions
  // (mn/|observed|) * row * V V^T.
  const Eigen::Index m = 20, n = 10, r = 2;
  const Eigen::MatrixXd Y = random_low_rank(m, n, r, 2024u);
  std::vector<std::vector<Eigen::Index>> omega(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < 6; ++k) omega[i].push_back((i + k) % n);
    std::sort(omega[i].begin(), omega[i].end());
  }
  const auto obs = observed_entries(Y, omega, 1e9);

  privmc::SvdConfig cfg;
  cfg.r = r;
  cfg.L = 1e9;
  cfg.sigma_override = 0.0;
  cfg.subspace_tol = 1e-13;
  cfg.subspace_max_sweeps = 100000;

  const auto model = privmc::run_private_svd(obs, cfg, {}, 99u);

  Eigen::MatrixXd masked = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j : omega[static_cast<std::size_t>(i)]) masked(i, j) = Y(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(masked.transpose() * masked);
  const Eigen::MatrixXd Vr = eig.eigenvectors().rightCols(r);
  const double density = static_cast<double>(m * n) / static_cast<double>(obs.observed_count());
  const Eigen::MatrixXd ref = density * masked * Vr * Vr.transpose();

  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      REQUIRE_THAT(model.centered_value(static_cast<std::uint64_t>(i), j),
                   WithinAbs(ref(i, j), 1e-9));
}

TEST_CASE("row clipping shrinks the covariance but not the local rows") {
  // One user with row (3, 4), L = 2.5: the covariance sees the row scaled to
  // norm 2.5, but the coefficients project the raw row, so the prediction
  // still recovers (3, 4).
  Eigen::MatrixXd Y(1, 2);
  Y << 3.0, 4.0;
  const auto obs = observed_entries(Y, full_mask(1, 2), 2.5);

  privmc::SvdConfig cfg;
  cfg.r = 1;
  cfg.L = 2.5;
  cfg.sigma_override = 0.0;
  cfg.subspace_tol = 1e-13;

  const auto model = privmc::run_private_svd(obs, cfg, {}, 3u);
  REQUIRE(model.basis[0][0] > 0.0);  // sign convention
  REQUIRE_THAT(model.centered_value(0, 0), WithinAbs(3.0, 1e-9));
  REQUIRE_THAT(model.centered_value(0, 1), WithinAbs(4.0, 1e-9));
}

TEST_CASE("one-shot runs are deterministic and noise responds to the seed") {
  const Eigen::Index m = 8, n = 5;
  const Eigen::MatrixXd Y = random_low_rank(m, n, 2, 5u);
  const auto obs = observed_entries(Y, full_mask(m, n), 1e9);

  privmc::SvdConfig cfg;
  cfg.r = 2;
  cfg.L = 6.0;

  const privmc::PrivacyParams params{1.0, 1e-6};
  const auto a = privmc::run_private_svd(obs, cfg, params, 21u);
  const auto b = privmc::run_private_svd(obs, cfg, params, 21u);
  REQUIRE(a.coeffs == b.coeffs);
  for (std::size_t t = 0; t < a.rank(); ++t)
    REQUIRE((a.basis[t].array() == b.basis[t].array()).all());

  const auto c = privmc::run_private_svd(obs, cfg, params, 22u);
  bool same = a.coeffs == c.coeffs;
  for (std::size_t t = 0; t < a.rank() && same; ++t)
    same = (a.basis[t].array() == c.basis[t].array()).all();
  REQUIRE_FALSE(same);
}

TEST_CASE("one-shot baseline rejects bad arguments") {
  Eigen::MatrixXd Y(2, 3);
  Y << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const auto obs = observed_entries(Y, full_mask(2, 3), 10.0);

  privmc::SvdConfig cfg;
  cfg.sigma_override = 0.0;

  privmc::SvdConfig bad_r = cfg;
  bad_r.r = 0;
  REQUIRE_THROWS_AS(privmc::run_private_svd(obs, bad_r, {}, 1u), std::invalid_argument);
  bad_r.r = 4;
  REQUIRE_THROWS_AS(privmc::run_private_svd(obs, bad_r, {}, 1u), std::invalid_argument);

  privmc::SvdConfig bad_L = cfg;
  bad_L.L = 0.0;
  REQUIRE_THROWS_AS(privmc::run_private_svd(obs, bad_L, {}, 1u), std::invalid_argument);

  privmc::SvdConfig gated;
  gated.r = 1;
  gated.L = 1.0;
  REQUIRE_THROWS_WITH(privmc::run_private_svd(obs, gated, {32.0, 2e-4}, 1u),
                      ContainsSubstring("exceeds"));

  privmc::ObservedMatrix empty;
  empty.rows.ncols = 3;
  empty.rows.offsets = {0, 0};
  empty.means = {0.0};
  REQUIRE_THROWS_AS(privmc::run_private_svd(empty, cfg, {}, 1u), std::invalid_argument);
}
