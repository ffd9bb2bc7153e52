#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "privmc/metrics.hpp"
#include "privmc/pgd.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

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

privmc::ObservedMatrix random_instance(Eigen::Index m, Eigen::Index n,
                                       std::size_t per_row, unsigned seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd Y(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) Y(i, j) = unif(eng);
  std::vector<std::vector<Eigen::Index>> omega(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> items(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::iota(items.begin(), items.end(), Eigen::Index{0});
    std::shuffle(items.begin(), items.end(), eng);
    omega[i].assign(items.begin(), items.begin() + static_cast<long>(per_row));
    std::sort(omega[i].begin(), omega[i].end());
  }
  return observed_entries(Y, omega, 1e9);
}

// Reference water level by bisection: sum max(0, lambda - tau) is continuous
// and decreasing in tau, so the level matching the budget brackets cleanly.
std::vector<double> project_by_search(const std::vector<double>& lambda, double k) {
  double sum = 0.0;
  for (double l : lambda) sum += l;
  if (sum <= k) return lambda;
  double lo = 0.0, hi = lambda.empty() ? 0.0 : lambda.front();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (double l : lambda) s += std::max(0.0, l - mid);
    (s > k ? lo : hi) = mid;
  }
  std::vector<double> z(lambda.size());
  const double tau = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < lambda.size(); ++i) z[i] = std::max(0.0, lambda[i] - tau);
  return z;
}

double nuclear_norm(const Eigen::MatrixXd& Y) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(Y).singularValues().sum();
}

}  // namespace

TEST_CASE("spectrum projection worked examples") {
  // (3, 2, 1) against budget 3: water level 1 drains to (2, 1, 0).
  const std::vector<double> z = privmc::nuclear_project({3.0, 2.0, 1.0}, 3.0);
  REQUIRE(z == std::vector<double>{2.0, 1.0, 0.0});

  // Slack budget: unchanged.
  const std::vector<double> slack = privmc::nuclear_project({1.5, 0.5}, 3.0);
  REQUIRE(slack == std::vector<double>{1.5, 0.5});

  // Zero budget drains everything.
  const std::vector<double> zero = privmc::nuclear_project({2.0, 1.0}, 0.0);
  REQUIRE(zero == std::vector<double>{0.0, 0.0});

  REQUIRE(privmc::nuclear_project({}, 1.0).empty());
}

TEST_CASE("spectrum projection invariants on random spectra") {
  std::mt19937_64 eng(77u);
  std::uniform_real_distribution<double> unif(0.0, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + static_cast<std::size_t>(eng() % 8);
    std::vector<double> lambda(len);
    for (double& l : lambda) l = unif(eng);
    std::sort(lambda.rbegin(), lambda.rend());
    const double k = unif(eng);

    const std::vector<double> z = privmc::nuclear_project(lambda, k);
    const std::vector<double> ref = project_by_search(lambda, k);

    double sum_l = 0.0, sum_z = 0.0;
    for (double l : lambda) sum_l += l;
    for (std::size_t i = 0; i < len; ++i) {
      REQUIRE(z[i] >= 0.0);
      REQUIRE(z[i] <= lambda[i]);
      if (i > 0) REQUIRE(z[i] <= z[i - 1]);
      REQUIRE_THAT(z[i], WithinAbs(ref[i], 1e-9));
      sum_z += z[i];
    }
    REQUIRE_THAT(sum_z, WithinAbs(std::min(k, sum_l), 1e-12));
  }
}

TEST_CASE("spectrum projection rejects malformed input") {
  REQUIRE_THROWS_AS(privmc::nuclear_project({2.0, -1.0}, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(privmc::nuclear_project({1.0, 2.0}, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(privmc::nuclear_project({1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("unit step with a slack budget lands exactly on the observations") {
  // From zero, eta = 1 replaces each observed entry with its target; a huge
  // budget keeps the projection inactive so nothing else moves.
  const auto obs = random_instance(6, 5, 3, 19u);
  privmc::PgdConfig cfg;
  cfg.k = 1e9;
  cfg.T = 1;
  cfg.eta = 1.0;
  cfg.sigma_override = 0.0;

  const auto model = privmc::run_private_pgd(obs, cfg, {}, 4u);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 5);
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    for (std::size_t a = 0; a < cs.size(); ++a)
      expected(static_cast<Eigen::Index>(u), cs[a]) = vs[a];
  }
  REQUIRE((model.values.array() == expected.array()).all());
  REQUIRE(model.means == obs.means);
}

TEST_CASE("step size schedules follow the replayed recurrence") {
  const auto obs = random_instance(5, 4, 2, 23u);

  for (auto mode : {privmc::PgdConfig::EtaMode::constant,
                    privmc::PgdConfig::EtaMode::inv_sqrt,
                    privmc::PgdConfig::EtaMode::inv_t}) {
    privmc::PgdConfig cfg;
    cfg.k = 1e9;  // projection inactive: the descent recurrence is everything
    cfg.T = 4;
    cfg.eta_mode = mode;
    cfg.eta = 0.25;
    cfg.sigma_override = 0.0;

    const auto model = privmc::run_private_pgd(obs, cfg, {}, 4u);

    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(5, 4);
    for (std::uint64_t t = 1; t <= cfg.T; ++t) {
      double eta = cfg.eta;
      if (mode == privmc::PgdConfig::EtaMode::inv_sqrt)
        eta = 1.0 / std::sqrt(static_cast<double>(t));
      else if (mode == privmc::PgdConfig::EtaMode::inv_t)
        eta = 1.0 / static_cast<double>(t);
      for (std::size_t u = 0; u < obs.num_users(); ++u) {
        const auto cs = obs.rows.row_cols(u);
        const auto vs = obs.rows.row_vals(u);
        for (std::size_t a = 0; a < cs.size(); ++a) {
          double& y = Y(static_cast<Eigen::Index>(u), cs[a]);
          y -= eta * (y - vs[a]);
        }
      }
    }
    INFO("mode " << static_cast<int>(mode));
    REQUIRE((model.values.array() == Y.array()).all());
  }
}

TEST_CASE("active projection keeps the iterate inside the nuclear ball") {
  const auto obs = random_instance(10, 6, 4, 31u);
  privmc::PgdConfig cfg;
  cfg.k = 1.0;
  cfg.T = 3;
  cfg.eta = 1.0;
  cfg.sigma_override = 0.0;

  const auto model = privmc::run_private_pgd(obs, cfg, {}, 12u);
  REQUIRE(nuclear_norm(model.values) <= cfg.k * (1.0 + 1e-9));
}

TEST_CASE("one projected step matches a dense shrink-and-rebuild reference") {
  // eta = 1 from zero gives Y1 = observed entries; the reference then
  // water-fills the singular values of Y1 directly.
  const auto obs = random_instance(8, 6, 4, 37u);
  const double k = 1.5;

  privmc::PgdConfig cfg;
  cfg.k = k;
  cfg.T = 1;
  cfg.eta = 1.0;
  cfg.sigma_override = 0.0;

  const auto model = privmc::run_private_pgd(obs, cfg, {}, 9u);

  Eigen::MatrixXd Y1 = Eigen::MatrixXd::Zero(8, 6);
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    for (std::size_t a = 0; a < cs.size(); ++a)
      Y1(static_cast<Eigen::Index>(u), cs[a]) = vs[a];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<double> sv(svd.singularValues().data(),
                         svd.singularValues().data() + svd.singularValues().size());
  const std::vector<double> z = privmc::nuclear_project(sv, k);
  Eigen::VectorXd zv =
      Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::MatrixXd ref = svd.matrixU() * zv.asDiagonal() * svd.matrixV().transpose();

  REQUIRE((model.values - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("noise-free descent drives the training risk down monotonically") {
  const auto obs = random_instance(12, 8, 5, 41u);
  privmc::PgdConfig cfg;
  cfg.k = 1e9;
  cfg.eta = 0.5;
  cfg.sigma_override = 0.0;

  double prev = privmc::empirical_risk(privmc::zero_baseline(obs), obs);
  const double start = prev;
  for (std::uint64_t T = 1; T <= 5; ++T) {
    cfg.T = T;
    const double risk =
        privmc::empirical_risk(privmc::run_private_pgd(obs, cfg, {}, 2u), obs);
    REQUIRE(risk < prev);
    prev = risk;
  }
  REQUIRE(prev < 1e-2 * start);
}

TEST_CASE("noisy descent is deterministic in the seed") {
  const auto obs = random_instance(6, 5, 3, 43u);
  privmc::PgdConfig cfg;
  cfg.k = 2.0;
  cfg.T = 2;
  cfg.eta = 0.5;
  cfg.L = 2.0;

  const privmc::PrivacyParams params{1.0, 1e-6};
  const auto a = privmc::run_private_pgd(obs, cfg, params, 33u);
  const auto b = privmc::run_private_pgd(obs, cfg, params, 33u);
  REQUIRE((a.values.array() == b.values.array()).all());

  const auto c = privmc::run_private_pgd(obs, cfg, params, 34u);
  REQUIRE_FALSE((a.values.array() == c.values.array()).all());
}

TEST_CASE("descent rejects bad configurations") {
  const auto obs = random_instance(4, 3, 2, 47u);
  privmc::PgdConfig cfg;
  cfg.sigma_override = 0.0;

  privmc::PgdConfig zero_T = cfg;
  zero_T.T = 0;
  REQUIRE_THROWS_AS(privmc::run_private_pgd(obs, zero_T, {}, 1u), std::invalid_argument);

  privmc::PgdConfig bad_eta = cfg;
  bad_eta.eta = 0.0;
  REQUIRE_THROWS_AS(privmc::run_private_pgd(obs, bad_eta, {}, 1u), std::invalid_argument);

  privmc::PgdConfig bad_k = cfg;
  bad_k.k = -1.0;
  REQUIRE_THROWS_AS(privmc::run_private_pgd(obs, bad_k, {}, 1u), std::invalid_argument);

  privmc::PgdConfig bad_sigma = cfg;
  bad_sigma.sigma_override = -0.5;
  REQUIRE_THROWS_AS(privmc::run_private_pgd(obs, bad_sigma, {}, 1u),
                    std::invalid_argument);

  privmc::PgdConfig gated;
  REQUIRE_THROWS_WITH(privmc::run_private_pgd(obs, gated, {32.0, 2e-4}, 1u),
                      ContainsSubstring("exceeds"));
}
