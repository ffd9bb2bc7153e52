#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "privmc/frank_wolfe.hpp"
#include "privmc/metrics.hpp"
#include "privmc/observed.hpp"
#include "privmc/parallel.hpp"
#include "privmc/pgd.hpp"
#include "privmc/privacy.hpp"
#include "privmc/ratings.hpp"
#include "privmc/svd_completion.hpp"
#include "privmc/synthetic.hpp"

namespace privmc {

enum class Algo {
  fw_private,
  fw_nonprivate,
  svd_private,
  pgd_private,
  pgd_nonprivate,
  zero_baseline,
};

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::fw_private: return "fw_private";
    case Algo::fw_nonprivate: return "fw_nonprivate";
    case Algo::svd_private: return "svd_private";
    case Algo::pgd_private: return "pgd_private";
    case Algo::pgd_nonprivate: return "pgd_nonprivate";
    case Algo::zero_baseline: return "zero_baseline";
  }
  return "?";
}

inline Algo algo_from_name(const std::string& s) {
  for (Algo a : {Algo::fw_private, Algo::fw_nonprivate, Algo::svd_private,
                 Algo::pgd_private, Algo::pgd_nonprivate, Algo::zero_baseline})
    if (s == algo_name(a)) return a;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

// Everything one sweep needs. Key names in config files and CLI flags match
// these fields one for one; see parse_experiment_config.
struct ExperimentSpec {
  std::string dataset;  // path, or "synthetic"
  RatingsFormat format = RatingsFormat::csv_comma;
  std::uint32_t synthetic_m = 100;
  std::uint32_t synthetic_n = 20;
  double scale_lo = 0.0;  // declared schema range of the source ratings
  double scale_hi = 5.0;
  std::optional<double> rescale_lo, rescale_hi;
  std::uint32_t xi = 80;
  double test_frac = 0.01;

  std::vector<Algo> algos{Algo::fw_private};
  std::vector<double> epsilons{1.0};
  double delta = 1e-6;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t master_seed = 1;

  double k = 0.0;        // 0: use the exact nuclear norm (synthetic data only)
  std::uint64_t T = 0;   // 0: pick via t_mode
  SuggestTMode t_mode = SuggestTMode::empirical;
  Eigen::Index r = 1;    // svd subspace rank
  FwConfig::Backend backend = FwConfig::Backend::exact;
  std::uint64_t gamma = 100;
  bool recalibrate_noise = false;
  PgdConfig::EtaMode pgd_eta_mode = PgdConfig::EtaMode::constant;
  double pgd_eta = 1.0;
  double beta = 0.01;
  std::optional<double> L;  // default: schema_row_bound(scale, xi)
  bool clip_predictions = true;
  bool timing = true;  // false writes 0 for wallclock_s (reproducible diffs)
};

struct ResultRow {
  std::string algo;
  double epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t T = 0;
  double k = 0.0;  // holds r for svd rows
  double train_risk = std::numeric_limits<double>::quiet_NaN();
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
  double wallclock_s = 0.0;
};

// Fixed schema, one row per (algorithm, epsilon, seed), reals at 6
// significant digits. Row order is deterministic (sorted), so identical
// specs give byte-identical files when timing is off.
inline void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "algo,epsilon,delta,seed,T,k,train_risk,test_rmse,wallclock_s\n";
  char buf[64];
  auto real = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.6g", x);
    out << buf;
  };
  for (const ResultRow& r : rows) {
    out << r.algo << ',';
    real(r.epsilon);
    out << ',';
    real(r.delta);
    out << ',' << r.seed << ',' << r.T << ',';
    real(r.k);
    out << ',';
    real(r.train_risk);
    out << ',';
    real(r.test_rmse);
    out << ',';
    real(r.wallclock_s);
    out << '\n';
  }
  if (!out) throw std::runtime_error("results: write failed");
}

namespace detail {

struct CellData {
  ObservedMatrix centered;  // unclipped (L = 0): svd projects raw rows
  ObservedMatrix clipped;
  std::vector<Rating> test;
  double L = 0.0;
  double k_synth = 0.0;  // exact nuclear norm when the data is synthetic
};

// Fresh preprocessing for one (seed): split first, then cap each user at xi,
// then center and clip. All randomness is keyed by (master_seed, seed) only,
// so every algorithm and epsilon sees the same split.
inline CellData prepare_cell(const ExperimentSpec& spec, const RatingsDataset* loaded,
                             std::uint64_t seed) {
  CellData cell;
  RatingsDataset ds;
  if (spec.dataset == "synthetic") {
    SyntheticData synth = synthetic_rank_one(
        {spec.synthetic_m, spec.synthetic_n, spec.xi},
        RngStream::derive_master(spec.master_seed, "data", seed));
    cell.k_synth = synth.nuclear_norm;
    ds = std::move(synth.ratings);
  } else {
    ds = *loaded;  // bounds already declared (and rescaled) at load time
  }
  if (spec.rescale_lo && spec.rescale_hi)
    rescale_ratings(ds, *spec.rescale_lo, *spec.rescale_hi);

  const RngStream prep{RngStream::derive_master(spec.master_seed, "prep", seed)};
  TrainTestSplit split = split_train_test(ds, spec.test_frac, prep);
  subsample_per_user(split.train, spec.xi, prep);

  cell.centered = center_per_user(split.train.triplets, ds.num_users, ds.num_items,
                                  ds.rating_lo, ds.rating_hi);
  cell.L = spec.L ? *spec.L : schema_row_bound(ds.rating_lo, ds.rating_hi, spec.xi);
  cell.clipped = cell.centered;
  clip_rows(cell.clipped, cell.L);
  cell.test = std::move(split.test);
  return cell;
}

}  // namespace detail

// Runs the full grid. Cells execute independently (parallel when
// set_max_threads allows) and rows come back sorted by (algo, epsilon,
// seed). A cell that throws produces a NaN row instead of killing the rest
// of the grid; the message goes to stderr.
inline std::vector<ResultRow> run_sweep(const ExperimentSpec& spec) {
  RatingsDataset loaded;
  std::string load_error;
  if (spec.dataset != "synthetic") {
    try {
      std::ifstream in(spec.dataset);
      if (!in) throw std::runtime_error("cannot open dataset '" + spec.dataset + "'");
      loaded = parse_ratings(in, spec.format);
      set_rating_bounds(loaded, spec.scale_lo, spec.scale_hi);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
  }

  struct Cell {
    Algo algo;
    double eps;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Algo a : spec.algos)
    for (double eps : spec.epsilons)
      for (std::uint64_t seed : spec.seeds) cells.push_back({a, eps, seed});

  std::vector<ResultRow> rows(cells.size());
  for_each_chunk(cells.size(), 1, [&](std::size_t c, std::size_t, std::size_t) {
    const Cell& cell = cells[c];
    ResultRow& row = rows[c];
    row.algo = algo_name(cell.algo);
    row.epsilon = cell.eps;
    row.delta = spec.delta;
    row.seed = cell.seed;
    try {
      if (!load_error.empty()) throw std::runtime_error(load_error);
      detail::CellData data = detail::prepare_cell(spec, &loaded, cell.seed);

      double k = spec.k;
      if (k <= 0.0) {
        if (spec.dataset != "synthetic")
          throw std::invalid_argument("k must be set for file datasets");
        k = data.k_synth;
      }
      std::uint64_t T = spec.T;
      if (T == 0)
        T = suggest_T(spec.t_mode, k, cell.eps,
                      static_cast<double>(data.clipped.num_items()), data.L,
                      static_cast<double>(data.clipped.observed_count()),
                      static_cast<double>(data.clipped.num_users()));

      const PrivacyParams params{cell.eps, spec.delta};
      const std::uint64_t train_seed =
          RngStream::derive_master(spec.master_seed, "train", cell.seed);

      const auto t0 = std::chrono::steady_clock::now();
      double train_risk = 0.0, rmse = 0.0;
      const double lo = spec.rescale_lo ? *spec.rescale_lo : spec.scale_lo;
      const double hi = spec.rescale_hi ? *spec.rescale_hi : spec.scale_hi;
      auto score = [&](const auto& model) {
        train_risk = empirical_risk(model, data.clipped);
        rmse = test_rmse(model, data.test, spec.clip_predictions, lo, hi);
      };
      switch (cell.algo) {
        case Algo::fw_private: {
          FwConfig cfg;
          cfg.k = k;
          cfg.T = T;
          cfg.L = data.L;
          cfg.beta = spec.beta;
          cfg.backend = spec.backend;
          cfg.gamma = spec.gamma;
          cfg.recalibrate_noise = spec.recalibrate_noise;
          score(run_private_fw(data.clipped, cfg, params, train_seed));
          row.T = T;
          row.k = k;
          break;
        }
        case Algo::fw_nonprivate: {
          score(run_nonprivate_fw(data.clipped, k, T, train_seed));
          row.T = T;
          row.k = k;
          break;
        }
        case Algo::svd_private: {
          SvdConfig cfg;
          cfg.r = spec.r;
          cfg.L = data.L;
          score(run_private_svd(data.centered, cfg, params, train_seed));
          row.T = 1;
          row.k = static_cast<double>(spec.r);
          break;
        }
        case Algo::pgd_private:
        case Algo::pgd_nonprivate: {
          PgdConfig cfg;
          cfg.k = k;
          cfg.T = T;
          cfg.L = data.L;
          cfg.eta_mode = spec.pgd_eta_mode;
          cfg.eta = spec.pgd_eta;
          if (cell.algo == Algo::pgd_nonprivate) cfg.sigma_override = 0.0;
          score(run_private_pgd(data.clipped, cfg, params, train_seed));
          row.T = T;
          row.k = k;
          break;
        }
        case Algo::zero_baseline: {
          score(zero_baseline(data.clipped));
          row.T = 0;
          row.k = 0.0;
          break;
        }
      }
      row.train_risk = train_risk;
      row.test_rmse = rmse;
      if (spec.timing) {
        const auto t1 = std::chrono::steady_clock::now();
        row.wallclock_s = std::chrono::duration<double>(t1 - t0).count();
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "sweep: %s eps=%g seed=%llu failed: %s\n", row.algo.c_str(),
                   row.epsilon, static_cast<unsigned long long>(row.seed), e.what());
    }
  });

  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.algo != b.algo) return a.algo < b.algo;
    if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
    return a.seed < b.seed;
  });
  return rows;
}

// ---- config files -------------------------------------------------------
//
// Plain "key = value" lines, '#' comments, keys as in ExperimentSpec.
// Lists (algos, eps, seeds) are comma-separated. The CLI parses its flags
// into the same map, so overriding works key by key.

inline std::map<std::string, std::string> parse_config_file(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key or value");
    kv[key] = val;
  }
  return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out))
    throw std::invalid_argument("config: bad number for '" + key + "': " + v);
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d))
    throw std::invalid_argument("config: '" + key + "' must be a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean for '" + key + "': " + v);
}

template <class F>
void split_list(const std::string& v, F&& push) {
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const std::string item =
        v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) push(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
}

}  // namespace detail

inline ExperimentSpec parse_experiment_config(
    const std::map<std::string, std::string>& kv) {
  ExperimentSpec spec;
  for (const auto& [key, val] : kv) {
    if (key == "dataset") spec.dataset = val;
    else if (key == "format") {
      if (val == "csv") spec.format = RatingsFormat::csv_comma;
      else if (val == "double_colon") spec.format = RatingsFormat::double_colon;
      else throw std::invalid_argument("config: format must be csv or double_colon");
    } else if (key == "synthetic_m") spec.synthetic_m = static_cast<std::uint32_t>(detail::to_u64(key, val));
    else if (key == "synthetic_n") spec.synthetic_n = static_cast<std::uint32_t>(detail::to_u64(key, val));
    else if (key == "scale_lo") spec.scale_lo = detail::to_double(key, val);
    else if (key == "scale_hi") spec.scale_hi = detail::to_double(key, val);
    else if (key == "rescale_lo") spec.rescale_lo = detail::to_double(key, val);
    else if (key == "rescale_hi") spec.rescale_hi = detail::to_double(key, val);
    else if (key == "xi") spec.xi = static_cast<std::uint32_t>(detail::to_u64(key, val));
    else if (key == "test_frac") spec.test_frac = detail::to_double(key, val);
    else if (key == "algos") {
      spec.algos.clear();
      detail::split_list(val, [&](const std::string& s) { spec.algos.push_back(algo_from_name(s)); });
      if (spec.algos.empty()) throw std::invalid_argument("config: empty algos list");
    } else if (key == "eps") {
      spec.epsilons.clear();
      detail::split_list(val, [&](const std::string& s) { spec.epsilons.push_back(detail::to_double(key, s)); });
      if (spec.epsilons.empty()) throw std::invalid_argument("config: empty eps list");
    } else if (key == "delta") spec.delta = detail::to_double(key, val);
    else if (key == "seeds") {
      spec.seeds.clear();
      detail::split_list(val, [&](const std::string& s) { spec.seeds.push_back(detail::to_u64(key, s)); });
      if (spec.seeds.empty()) throw std::invalid_argument("config: empty seeds list");
    } else if (key == "master_seed") spec.master_seed = detail::to_u64(key, val);
    else if (key == "k") spec.k = val == "nuclear" ? 0.0 : detail::to_double(key, val);
    else if (key == "T") {
      if (val == "empirical") { spec.T = 0; spec.t_mode = SuggestTMode::empirical; }
      else if (val == "generalization") { spec.T = 0; spec.t_mode = SuggestTMode::generalization; }
      else spec.T = detail::to_u64(key, val);
    } else if (key == "r") spec.r = static_cast<Eigen::Index>(detail::to_u64(key, val));
    else if (key == "backend") {
      if (val == "exact") spec.backend = FwConfig::Backend::exact;
      else if (val == "oja") spec.backend = FwConfig::Backend::oja;
      else throw std::invalid_argument("config: backend must be exact or oja");
    } else if (key == "gamma") spec.gamma = detail::to_u64(key, val);
    else if (key == "recalibrate_noise") spec.recalibrate_noise = detail::to_bool(key, val);
    else if (key == "pgd_eta") {
      if (val == "invsqrt") spec.pgd_eta_mode = PgdConfig::EtaMode::inv_sqrt;
      else if (val == "invt") spec.pgd_eta_mode = PgdConfig::EtaMode::inv_t;
      else { spec.pgd_eta_mode = PgdConfig::EtaMode::constant; spec.pgd_eta = detail::to_double(key, val); }
    } else if (key == "beta") spec.beta = detail::to_double(key, val);
    else if (key == "L") spec.L = detail::to_double(key, val);
    else if (key == "clip_predictions") spec.clip_predictions = detail::to_bool(key, val);
    else if (key == "timing") spec.timing = detail::to_bool(key, val);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  if (spec.dataset.empty())
    throw std::invalid_argument("config: dataset is required (path or 'synthetic')");
  if (spec.test_frac < 0.0 || spec.test_frac >= 1.0)
    throw std::invalid_argument("config: test_frac must be in [0, 1)");
  return spec;
}

}  // namespace privmc
