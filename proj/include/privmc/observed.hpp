#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "privmc/ratings.hpp"
#include "privmc/sparse.hpp"

namespace privmc {

// Per-user centered training data: sorted item lists, values with the user
// mean removed, the means themselves, and the row-norm bound the rows were
// clipped to. This is the one structure every trainer consumes.
struct ObservedMatrix {
  SparseRows rows;            // ncols = n, values are centered ratings
  std::vector<double> means;  // u_i, one per user (midpoint for empty users)
  double L = 0.0;             // 0 until clip_rows has run

  std::size_t num_users() const { return rows.rows(); }
  Eigen::Index num_items() const { return rows.ncols; }
  std::size_t observed_count() const { return rows.nnz(); }
};

// Deterministic public row bound: half the rating range times sqrt of the
// per-user cap. Depends on the schema only, never on the data.
inline double schema_row_bound(double rating_lo, double rating_hi, std::uint32_t xi) {
  if (!(rating_lo < rating_hi))
    throw std::invalid_argument("schema_row_bound: need rating_lo < rating_hi");
  if (xi == 0) throw std::invalid_argument("schema_row_bound: xi must be >= 1");
  return 0.5 * (rating_hi - rating_lo) * std::sqrt(static_cast<double>(xi));
}

// Builds the centered matrix from training triplets. Means are computed from
// the user's own training ratings; users with none get the scale midpoint.
inline ObservedMatrix center_per_user(const std::vector<Rating>& train,
                                      std::uint32_t num_users, std::uint32_t num_items,
                                      double rating_lo, double rating_hi) {
  ObservedMatrix obs;
  obs.rows.ncols = static_cast<Eigen::Index>(num_items);
  obs.means.assign(num_users, 0.0);

  std::vector<std::uint32_t> counts(num_users, 0);
  for (const Rating& r : train) {
    if (r.user >= num_users || r.item >= num_items)
      throw std::invalid_argument("center_per_user: triplet index out of range");
    obs.means[r.user] += r.value;
    ++counts[r.user];
  }
  const double midpoint = 0.5 * (rating_lo + rating_hi);
  for (std::uint32_t u = 0; u < num_users; ++u)
    obs.means[u] = counts[u] ? obs.means[u] / counts[u] : midpoint;

  obs.rows.offsets.assign(num_users + 1, 0);
  for (const Rating& r : train) ++obs.rows.offsets[r.user + 1];
  for (std::uint32_t u = 0; u < num_users; ++u)
    obs.rows.offsets[u + 1] += obs.rows.offsets[u];

  obs.rows.cols.resize(train.size());
  obs.rows.vals.resize(train.size());
  std::vector<std::size_t> cursor(obs.rows.offsets.begin(), obs.rows.offsets.end() - 1);
  for (const Rating& r : train) {
    const std::size_t at = cursor[r.user]++;
    obs.rows.cols[at] = static_cast<Eigen::Index>(r.item);
    obs.rows.vals[at] = r.value - obs.means[r.user];
  }
  // sort each row by item; values follow
  for (std::uint32_t u = 0; u < num_users; ++u) {
    const std::size_t b = obs.rows.offsets[u], e = obs.rows.offsets[u + 1];
    std::vector<std::size_t> perm(e - b);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
      return obs.rows.cols[b + x] < obs.rows.cols[b + y];
    });
    std::vector<Eigen::Index> c(e - b);
    std::vector<double> v(e - b);
    for (std::size_t j = 0; j < perm.size(); ++j) {
      c[j] = obs.rows.cols[b + perm[j]];
      v[j] = obs.rows.vals[b + perm[j]];
    }
    std::copy(c.begin(), c.end(), obs.rows.cols.begin() + b);
    std::copy(v.begin(), v.end(), obs.rows.vals.begin() + b);
  }
  return obs;
}

// Scales any row with norm > L back onto the L-sphere. Idempotent; records L.
inline void clip_rows(ObservedMatrix& obs, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("clip_rows: L must be > 0");
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    const double norm = obs.rows.row_norm(u);
    if (norm > L) {
      const double scale = L / norm;
      for (double& v : obs.rows.row_vals(u)) v *= scale;
    }
  }
  obs.L = L;
}

// Text round trip. Layout:
//   line 1:        m n L
//   lines 2..m+1:  user_index<TAB>item:value,item:value,...   (may be empty)
//   last line:     means u_0 u_1 ... u_{m-1}
// Values print with 17 significant digits so doubles survive exactly.
inline void save_observed(const ObservedMatrix& obs, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", obs.L);
  out << obs.num_users() << ' ' << obs.num_items() << ' ' << buf << '\n';
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    out << u << '\t';
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    for (std::size_t j = 0; j < cs.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", vs[j]);
      out << (j ? "," : "") << cs[j] << ':' << buf;
    }
    out << '\n';
  }
  out << "means";
  for (double m : obs.means) {
    std::snprintf(buf, sizeof buf, "%.17g", m);
    out << ' ' << buf;
  }
  out << '\n';
  if (!out) throw std::runtime_error("save_observed: write failed");
}

inline ObservedMatrix load_observed(std::istream& in) {
  ObservedMatrix obs;
  std::size_t m = 0;
  Eigen::Index n = 0;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_observed: missing header");
  {
    std::istringstream hdr(line);
    if (!(hdr >> m >> n >> obs.L))
      throw std::runtime_error("load_observed: bad header '" + line + "'");
  }
  obs.rows.ncols = n;
  obs.rows.offsets.assign(1, 0);
  for (std::size_t u = 0; u < m; ++u) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_observed: truncated at row " + std::to_string(u));
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_observed: row " + std::to_string(u) + " has no tab");
    if (std::stoull(line.substr(0, tab)) != u)
      throw std::runtime_error("load_observed: row index mismatch at " + std::to_string(u));
    std::string_view items(line);
    items.remove_prefix(tab + 1);
    Eigen::Index prev = -1;
    while (!items.empty()) {
      const std::size_t comma = items.find(',');
      std::string_view entry = items.substr(0, comma);
      items = comma == std::string_view::npos ? std::string_view{}
                                              : items.substr(comma + 1);
      const std::size_t colon = entry.find(':');
      if (colon == std::string_view::npos)
        throw std::runtime_error("load_observed: bad entry '" + std::string(entry) + "'");
      const Eigen::Index col = std::stoll(std::string(entry.substr(0, colon)));
      double val = 0.0;
      if (!detail::parse_double(entry.substr(colon + 1), val))
        throw std::runtime_error("load_observed: bad value '" + std::string(entry) + "'");
      if (col <= prev || col >= n)
        throw std::runtime_error("load_observed: bad column order in row " +
                                 std::to_string(u));
      prev = col;
      obs.rows.cols.push_back(col);
      obs.rows.vals.push_back(val);
    }
    obs.rows.offsets.push_back(obs.rows.cols.size());
  }
  if (!std::getline(in, line) || line.rfind("means", 0) != 0)
    throw std::runtime_error("load_observed: missing means line");
  {
    std::istringstream ms(line.substr(5));
    obs.means.assign(m, 0.0);
    for (std::size_t u = 0; u < m; ++u)
      if (!(ms >> obs.means[u]))
        throw std::runtime_error("load_observed: means line too short");
  }
  return obs;
}

}  // namespace privmc
