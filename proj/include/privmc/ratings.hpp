#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "privmc/rng.hpp"

namespace privmc {

struct Rating {
  std::uint32_t user = 0;  // dense 0-based index
  std::uint32_t item = 0;
  double value = 0.0;
};

// Parsed ratings with users/items reindexed densely in first-appearance
// order. The raw-id maps are kept so results can be joined back to the
// source data.
struct RatingsDataset {
  std::vector<Rating> triplets;
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  double rating_lo = 0.0;
  double rating_hi = 0.0;
  std::vector<std::string> user_ids;  // dense index -> raw id
  std::vector<std::string> item_ids;
};

enum class RatingsFormat { csv_comma, double_colon };

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

}  // namespace detail

// Reads "user,item,rating[,timestamp]" (optional single header line) or
// "user::item::rating::timestamp". Timestamps are ignored. Malformed lines
// and duplicate (user, item) pairs are errors that name the offending line.
// rating_lo/rating_hi are set to the observed min/max; ingest tools that know
// the schema range should override them before deriving any bounds.
inline RatingsDataset parse_ratings(std::istream& in, RatingsFormat format) {
  RatingsDataset ds;
  std::unordered_map<std::string, std::uint32_t> user_index, item_index;
  std::unordered_set<std::uint64_t> seen;
  const std::string_view sep = format == RatingsFormat::csv_comma ? "," : "::";

  std::string line;
  std::size_t lineno = 0;
  bool first_data_line = true;
  double lo = 0.0, hi = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_fields(line, sep);
    if (fields.size() != 3 && fields.size() != 4) {
      if (first_data_line && format == RatingsFormat::csv_comma) continue;  // header
      throw std::runtime_error("ratings: line " + std::to_string(lineno) +
                               ": expected 3 or 4 fields, got " +
                               std::to_string(fields.size()));
    }
    double value = 0.0;
    if (!detail::parse_double(fields[2], value)) {
      if (first_data_line && format == RatingsFormat::csv_comma) continue;  // header
      throw std::runtime_error("ratings: line " + std::to_string(lineno) +
                               ": bad rating field '" + std::string(fields[2]) + "'");
    }
    first_data_line = false;

    auto intern = [](std::unordered_map<std::string, std::uint32_t>& index,
                     std::vector<std::string>& ids, std::string_view raw) {
      auto [it, inserted] = index.try_emplace(std::string(raw),
                                              static_cast<std::uint32_t>(ids.size()));
      if (inserted) ids.emplace_back(raw);
      return it->second;
    };
    const std::uint32_t u = intern(user_index, ds.user_ids, fields[0]);
    const std::uint32_t i = intern(item_index, ds.item_ids, fields[1]);
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    if (!seen.insert(key).second)
      throw std::runtime_error("ratings: line " + std::to_string(lineno) +
                               ": duplicate rating for user '" +
                               std::string(fields[0]) + "', item '" +
                               std::string(fields[1]) + "'");
    if (ds.triplets.empty()) {
      lo = hi = value;
    } else {
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
    ds.triplets.push_back({u, i, value});
  }
  ds.num_users = static_cast<std::uint32_t>(ds.user_ids.size());
  ds.num_items = static_cast<std::uint32_t>(ds.item_ids.size());
  ds.rating_lo = lo;
  ds.rating_hi = hi;
  return ds;
}

// Declares the schema range, validating that every parsed value fits.
inline void set_rating_bounds(RatingsDataset& ds, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("set_rating_bounds: need lo < hi");
  for (const Rating& r : ds.triplets)
    if (r.value < lo || r.value > hi)
      throw std::runtime_error("ratings: value " + std::to_string(r.value) +
                               " outside declared range [" + std::to_string(lo) +
                               ", " + std::to_string(hi) + "]");
  ds.rating_lo = lo;
  ds.rating_hi = hi;
}

// Affine map of [rating_lo, rating_hi] onto [lo, hi]. A degenerate source
// range (every rating equal) maps everything to the target midpoint.
inline void rescale_ratings(RatingsDataset& ds, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("rescale_ratings: need lo < hi");
  if (lo == ds.rating_lo && hi == ds.rating_hi) return;  // exact identity
  const double src = ds.rating_hi - ds.rating_lo;
  for (Rating& r : ds.triplets)
    r.value = src == 0.0 ? 0.5 * (lo + hi)
                         : lo + (r.value - ds.rating_lo) * (hi - lo) / src;
  ds.rating_lo = lo;
  ds.rating_hi = hi;
}

// Keeps at most xi ratings per user, chosen uniformly without replacement;
// per-user streams make the choice independent of storage order and threads.
inline void subsample_per_user(RatingsDataset& ds, std::uint32_t xi,
                               const RngStream& stream) {
  if (xi == 0) throw std::invalid_argument("subsample_per_user: xi must be >= 1");
  std::vector<std::vector<std::uint32_t>> per_user(ds.num_users);
  for (std::uint32_t t = 0; t < ds.triplets.size(); ++t)
    per_user[ds.triplets[t].user].push_back(t);

  std::vector<char> keep(ds.triplets.size(), 0);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    auto& idx = per_user[u];
    if (idx.size() <= xi) {
      for (auto t : idx) keep[t] = 1;
      continue;
    }
    auto eng = stream.with("subsample", u, "pick").engine();
    for (std::uint32_t j = 0; j < xi; ++j) {  // partial Fisher-Yates
      std::uniform_int_distribution<std::size_t> pick(j, idx.size() - 1);
      std::swap(idx[j], idx[pick(eng)]);
      keep[idx[j]] = 1;
    }
  }
  std::vector<Rating> kept;
  kept.reserve(ds.triplets.size());
  for (std::uint32_t t = 0; t < ds.triplets.size(); ++t)
    if (keep[t]) kept.push_back(ds.triplets[t]);
  ds.triplets = std::move(kept);
}

struct TrainTestSplit {
  RatingsDataset train;
  std::vector<Rating> test;
};

// Holds out round(frac * N) ratings uniformly at random. The test set is
// drawn from the full dataset, before any per-user subsampling, so held-out
// entries are never training candidates.
inline TrainTestSplit split_train_test(const RatingsDataset& ds, double frac,
                                       const RngStream& stream) {
  if (frac < 0.0 || frac >= 1.0)
    throw std::invalid_argument("split_train_test: need 0 <= frac < 1");
  const std::size_t total = ds.triplets.size();
  const std::size_t nheld = static_cast<std::size_t>(
      std::llround(frac * static_cast<double>(total)));

  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto eng = stream.with("split", 0, "holdout").engine();
  for (std::size_t j = 0; j < nheld; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, total - 1);
    std::swap(order[j], order[pick(eng)]);
  }
  std::vector<char> held(total, 0);
  for (std::size_t j = 0; j < nheld; ++j) held[order[j]] = 1;

  TrainTestSplit split;
  split.train = RatingsDataset{{},
                               ds.num_users,
                               ds.num_items,
                               ds.rating_lo,
                               ds.rating_hi,
                               ds.user_ids,
                               ds.item_ids};
  split.train.triplets.reserve(total - nheld);
  split.test.reserve(nheld);
  for (std::size_t t = 0; t < total; ++t)
    (held[t] ? split.test : split.train.triplets).push_back(ds.triplets[t]);
  return split;
}

}  // namespace privmc
