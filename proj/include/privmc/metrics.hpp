#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <vector>

#include "privmc/frank_wolfe.hpp"
#include "privmc/observed.hpp"
#include "privmc/ratings.hpp"

namespace privmc {

// Anything with per-user means and a centered reconstruction can be scored.
template <class M>
concept PredictiveModel = requires(const M& m, std::uint64_t u, Eigen::Index j) {
  { m.centered_value(u, j) } -> std::convertible_to<double>;
  { m.means } -> std::convertible_to<const std::vector<double>&>;
};

// Raw-space prediction: centered reconstruction plus the user's mean,
// optionally clipped to the rating range. Out-of-range indices are errors.
template <PredictiveModel M>
double predict(const M& model, std::uint64_t user, Eigen::Index item,
               bool clip = false, double lo = 0.0, double hi = 0.0) {
  if (user >= model.means.size())
    throw std::out_of_range("predict: user index out of range");
  if (item < 0 || item >= model.num_items)
    throw std::out_of_range("predict: item index out of range");
  double y = model.centered_value(user, item) + model.means[user];
  if (clip) y = std::clamp(y, lo, hi);
  return y;
}

// Training objective in centered space: (1 / 2|Omega|) * squared Frobenius
// error on the observed entries.
template <PredictiveModel M>
double empirical_risk(const M& model, const ObservedMatrix& obs) {
  const std::size_t count = obs.observed_count();
  if (count == 0) throw std::invalid_argument("empirical_risk: no observed entries");
  double total = 0.0;
  for (std::size_t u = 0; u < obs.num_users(); ++u) {
    const auto cs = obs.rows.row_cols(u);
    const auto vs = obs.rows.row_vals(u);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      const double d = model.centered_value(u, cs[a]) - vs[a];
      total += d * d;
    }
  }
  return total / (2.0 * static_cast<double>(count));
}

// RMSE against held-out raw ratings; predictions get the user mean added
// back and are clipped to the rating range by default.
template <PredictiveModel M>
double test_rmse(const M& model, const std::vector<Rating>& test, bool clip,
                 double rating_lo, double rating_hi) {
  if (test.empty()) throw std::invalid_argument("test_rmse: empty test set");
  double total = 0.0;
  for (const Rating& r : test) {
    const double p = predict(model, r.user, static_cast<Eigen::Index>(r.item), clip,
                             rating_lo, rating_hi);
    const double d = p - r.value;
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(test.size()));
}

// Predicts the per-user mean everywhere: the model every private run has to
// beat before it is worth anything.
inline FactoredModel zero_baseline(const ObservedMatrix& obs) {
  FactoredModel model;
  model.num_users = obs.num_users();
  model.num_items = obs.num_items();
  model.row_bound = obs.L;
  model.means = obs.means;
  return model;
}

}  // namespace privmc
