#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "privmc/ratings.hpp"
#include "privmc/rng.hpp"

namespace privmc {

struct SyntheticConfig {
  std::uint32_t m = 100;   // users
  std::uint32_t n = 20;    // items
  std::uint32_t xi = 10;   // observed entries per user
};

struct SyntheticData {
  RatingsDataset ratings;   // xi observed entries per user, values in [-1, 1]
  std::vector<double> u;    // hidden factors, unit infinity norm
  std::vector<double> v;
  double nuclear_norm = 0;  // ||u v^T||_* = ||u||_2 ||v||_2
};

// Rank-one ground truth Y* = u v^T with u, v iid uniform on [-1, 1] rescaled
// to unit infinity norm, observed at xi uniformly chosen entries per user
// (without replacement). The exact nuclear norm of Y* comes along for free
// and is the customary budget for runs on this data.
inline SyntheticData synthetic_rank_one(const SyntheticConfig& cfg,
                                        std::uint64_t master_seed) {
  if (cfg.m == 0 || cfg.n == 0) throw std::invalid_argument("synthetic: empty shape");
  if (cfg.xi == 0 || cfg.xi > cfg.n)
    throw std::invalid_argument("synthetic: need 1 <= xi <= n");
  const RngStream base{master_seed};
  SyntheticData out;
  out.u.resize(cfg.m);
  out.v.resize(cfg.n);

  auto fill_unit_inf = [](std::vector<double>& x, std::mt19937_64 eng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double max_abs = 0.0;
    do {
      for (double& xi_ : x) {
        xi_ = unif(eng);
        max_abs = std::max(max_abs, std::abs(xi_));
      }
    } while (max_abs == 0.0);
    for (double& xi_ : x) xi_ /= max_abs;
  };
  fill_unit_inf(out.u, base.with("synth", 0, "u").engine());
  fill_unit_inf(out.v, base.with("synth", 0, "v").engine());

  double nu = 0.0, nv = 0.0;
  for (double x : out.u) nu += x * x;
  for (double x : out.v) nv += x * x;
  out.nuclear_norm = std::sqrt(nu) * std::sqrt(nv);

  RatingsDataset& ds = out.ratings;
  ds.num_users = cfg.m;
  ds.num_items = cfg.n;
  ds.rating_lo = -1.0;
  ds.rating_hi = 1.0;
  ds.user_ids.reserve(cfg.m);
  ds.item_ids.reserve(cfg.n);
  for (std::uint32_t u = 0; u < cfg.m; ++u) ds.user_ids.push_back(std::to_string(u));
  for (std::uint32_t j = 0; j < cfg.n; ++j) ds.item_ids.push_back(std::to_string(j));
  ds.triplets.reserve(static_cast<std::size_t>(cfg.m) * cfg.xi);

  std::vector<std::uint32_t> items(cfg.n);
  for (std::uint32_t u = 0; u < cfg.m; ++u) {
    for (std::uint32_t j = 0; j < cfg.n; ++j) items[j] = j;
    auto eng = base.with("synth", u, "mask").engine();
    for (std::uint32_t j = 0; j < cfg.xi; ++j) {
      std::uniform_int_distribution<std::uint32_t> pick(j, cfg.n - 1);
      std::swap(items[j], items[pick(eng)]);
      ds.triplets.push_back({u, items[j], out.u[u] * out.v[items[j]]});
    }
  }
  return out;
}

}  // namespace privmc
