// Command-line front end: ingest / train / eval / sweep / noise-calc.
//
// Exit codes: 0 ok, 2 bad usage, 1 runtime failure (bad files, invalid
// parameter values, ...).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "privmc/privmc.hpp"

namespace {

using namespace privmc;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

RatingsFormat format_from_string(const std::string& s) {
  if (s == "csv") return RatingsFormat::csv_comma;
  if (s == "double_colon") return RatingsFormat::double_colon;
  throw std::invalid_argument("format must be csv or double_colon");
}

// Ratings where user/item are already 0-based row/column indices (the test
// file written by `ingest`). Deliberately not parse_ratings: that one
// re-indexes ids by first appearance, which would scramble the alignment
// with the saved matrix.
std::vector<Rating> read_indexed_ratings(std::istream& in) {
  std::vector<Rating> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("user,", 0) == 0) continue;  // header
    unsigned long u = 0, i = 0;
    double v = 0.0;
    if (std::sscanf(line.c_str(), "%lu,%lu,%lf", &u, &i, &v) != 3)
      throw std::runtime_error("test file line " + std::to_string(lineno) +
                               ": expected user,item,rating");
    out.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i), v});
  }
  if (out.empty()) throw std::runtime_error("test file has no ratings");
  return out;
}

void write_indexed_ratings(const std::vector<Rating>& ratings, std::ostream& out) {
  out << "user,item,rating\n";
  char buf[64];
  for (const Rating& r : ratings) {
    std::snprintf(buf, sizeof buf, "%u,%u,%.17g\n", r.user, r.item, r.value);
    out << buf;
  }
}

struct IngestArgs {
  std::string input, format = "csv", output, test_output;
  double scale_lo = 0.0, scale_hi = 5.0;
  std::optional<double> rescale_lo, rescale_hi, L;
  std::uint32_t xi = 80;
  double test_frac = 0.01;
  std::uint64_t seed = 1;
  bool no_clip = false;
};

int run_ingest(const IngestArgs& a) {
  auto in = open_in(a.input);
  RatingsDataset ds = parse_ratings(in, format_from_string(a.format));
  set_rating_bounds(ds, a.scale_lo, a.scale_hi);
  if (a.rescale_lo.has_value() != a.rescale_hi.has_value())
    throw std::invalid_argument("--rescale-lo and --rescale-hi go together");
  if (a.rescale_lo) rescale_ratings(ds, *a.rescale_lo, *a.rescale_hi);

  const RngStream prep{RngStream::derive_master(a.seed, "prep", 0)};
  TrainTestSplit split = split_train_test(ds, a.test_frac, prep);
  subsample_per_user(split.train, a.xi, prep);

  ObservedMatrix obs = center_per_user(split.train.triplets, ds.num_users,
                                       ds.num_items, ds.rating_lo, ds.rating_hi);
  const double L = a.L ? *a.L : schema_row_bound(ds.rating_lo, ds.rating_hi, a.xi);
  if (!a.no_clip) clip_rows(obs, L);

  auto out = open_out(a.output);
  save_observed(obs, out);
  if (!a.test_output.empty()) {
    auto tout = open_out(a.test_output);
    write_indexed_ratings(split.test, tout);
  }
  std::printf("ingest: %u users, %u items, %zu train entries, %zu test entries, L=%.6g%s\n",
              ds.num_users, ds.num_items, static_cast<std::size_t>(obs.observed_count()),
              split.test.size(), L, a.no_clip ? " (rows not clipped)" : "");
  return 0;
}

struct TrainArgs {
  std::string input, algo = "fw", output, T = "empirical";
  double eps = 1.0, delta = 1e-6, k = 0.0, beta = 0.01, eta = 1.0;
  std::optional<double> L;
  std::string backend = "exact", eta_mode = "constant";
  std::uint64_t gamma = 100, r = 1, seed = 1;
};

int run_train(const TrainArgs& a) {
  auto in = open_in(a.input);
  ObservedMatrix obs = load_observed(in);
  const double L = a.L ? *a.L : obs.L;
  if (L <= 0.0)
    throw std::invalid_argument("matrix file records no row bound; pass --L");

  const bool is_private = a.algo == "fw" || a.algo == "svd" || a.algo == "pgd";
  PrivacyParams params{a.eps, a.delta};
  if (is_private) validate_params(params);

  std::uint64_t T = 0;
  if (a.T == "empirical" || a.T == "generalization") {
    if (a.k <= 0.0) throw std::invalid_argument("--k is required to pick T");
    T = suggest_T(a.T == "empirical" ? SuggestTMode::empirical
                                     : SuggestTMode::generalization,
                  a.k, a.eps, static_cast<double>(obs.num_items()), L,
                  static_cast<double>(obs.observed_count()),
                  static_cast<double>(obs.num_users()));
  } else {
    T = detail::to_u64("T", a.T);
    if (T == 0) throw std::invalid_argument("--T must be at least 1");
  }

  auto out = open_out(a.output);
  double risk = 0.0;
  if (a.algo == "fw" || a.algo == "fw_nonprivate") {
    if (a.k <= 0.0) throw std::invalid_argument("--k is required for fw");
    FactoredModel model;
    if (a.algo == "fw") {
      FwConfig cfg;
      cfg.k = a.k;
      cfg.T = T;
      cfg.L = L;
      cfg.beta = a.beta;
      cfg.backend = a.backend == "oja" ? FwConfig::Backend::oja : FwConfig::Backend::exact;
      cfg.gamma = a.gamma;
      model = run_private_fw(obs, cfg, params, a.seed);
    } else {
      model = run_nonprivate_fw(obs, a.k, T, a.seed);
    }
    risk = empirical_risk(model, obs);
    save_model(model, out);
  } else if (a.algo == "svd") {
    SvdConfig cfg;
    cfg.r = static_cast<Eigen::Index>(a.r);
    cfg.L = L;
    FactoredModel model = run_private_svd(obs, cfg, params, a.seed);
    risk = empirical_risk(model, obs);
    save_model(model, out);
  } else if (a.algo == "pgd" || a.algo == "pgd_nonprivate") {
    if (a.k <= 0.0) throw std::invalid_argument("--k is required for pgd");
    PgdConfig cfg;
    cfg.k = a.k;
    cfg.T = T;
    cfg.L = L;
    if (a.eta_mode == "invsqrt") cfg.eta_mode = PgdConfig::EtaMode::inv_sqrt;
    else if (a.eta_mode == "invt") cfg.eta_mode = PgdConfig::EtaMode::inv_t;
    else cfg.eta = a.eta;
    if (a.algo == "pgd_nonprivate") cfg.sigma_override = 0.0;
    DenseModel model = run_private_pgd(obs, cfg, params, a.seed);
    risk = empirical_risk(model, obs);
    save_model(model, out);
  } else {
    throw std::invalid_argument("unknown --algo '" + a.algo + "'");
  }
  std::printf("train: algo=%s T=%llu train_risk=%.6f\n", a.algo.c_str(),
              static_cast<unsigned long long>(T), risk);
  return 0;
}

struct EvalArgs {
  std::string model, test;
  double scale_lo = 0.0, scale_hi = 5.0;
  bool no_clip = false;
};

int run_eval(const EvalArgs& a) {
  auto min = open_in(a.model);
  const std::string kind = peek_model_kind(min);
  auto tin = open_in(a.test);
  const std::vector<Rating> test = read_indexed_ratings(tin);

  double rmse = 0.0;
  if (kind == "factored") {
    FactoredModel model = load_factored_model(min);
    rmse = test_rmse(model, test, !a.no_clip, a.scale_lo, a.scale_hi);
  } else {
    DenseModel model = load_dense_model(min);
    rmse = test_rmse(model, test, !a.no_clip, a.scale_lo, a.scale_hi);
  }
  std::printf("test_rmse = %.6f (%zu ratings)\n", rmse, test.size());
  return 0;
}

struct SweepArgs {
  std::string config, output;
  std::vector<std::string> sets;
  // direct flag overrides, applied on top of the config file
  std::map<std::string, std::string> kv;
  bool no_timing = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  std::map<std::string, std::string> kv;
  if (!a.config.empty()) {
    auto in = open_in(a.config);
    kv = parse_config_file(in);
  }
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [key, val] : a.kv) kv[key] = val;
  if (a.no_timing) kv["timing"] = "false";

  ExperimentSpec spec = parse_experiment_config(kv);
  std::vector<ResultRow> rows = run_sweep(spec);
  if (a.output.empty()) {
    write_results_csv(rows, std::cout);
  } else {
    auto out = open_out(a.output);
    write_results_csv(rows, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private low-rank matrix completion"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads (never changes results)");

  IngestArgs ing;
  CLI::App* ingest = app.add_subcommand("ingest", "preprocess a ratings file");
  ingest->add_option("--input", ing.input, "ratings file")->required();
  ingest->add_option("--format", ing.format, "csv | double_colon");
  ingest->add_option("--scale-lo", ing.scale_lo, "schema rating minimum");
  ingest->add_option("--scale-hi", ing.scale_hi, "schema rating maximum");
  ingest->add_option("--rescale-lo", [&ing](const auto& v) { ing.rescale_lo = std::stod(v[0]); return true; }, "rescale ratings: new minimum");
  ingest->add_option("--rescale-hi", [&ing](const auto& v) { ing.rescale_hi = std::stod(v[0]); return true; }, "rescale ratings: new maximum");
  ingest->add_option("--xi", ing.xi, "max ratings kept per user");
  ingest->add_option("--test-frac", ing.test_frac, "held-out fraction");
  ingest->add_option("--seed", ing.seed, "seed for split/subsample");
  ingest->add_option("--L", [&ing](const auto& v) { ing.L = std::stod(v[0]); return true; }, "row norm bound (default from schema range and xi)");
  ingest->add_flag("--no-clip", ing.no_clip, "skip row clipping");
  ingest->add_option("--output", ing.output, "matrix file to write")->required();
  ingest->add_option("--test-output", ing.test_output, "held-out ratings file to write");

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "fit one model on an ingested matrix");
  train->add_option("--input", tr.input, "matrix file from ingest")->required();
  train->add_option("--algo", tr.algo, "fw | fw_nonprivate | svd | pgd | pgd_nonprivate");
  train->add_option("--eps", tr.eps, "privacy epsilon");
  train->add_option("--delta", tr.delta, "privacy delta");
  train->add_option("--k", tr.k, "nuclear norm bound");
  train->add_option("--T", tr.T, "iterations, or empirical | generalization");
  train->add_option("--r", tr.r, "subspace rank (svd)");
  train->add_option("--beta", tr.beta, "eigenvalue inflation confidence (fw)");
  train->add_option("--backend", tr.backend, "top eigenvector backend for fw: exact | oja");
  train->add_option("--gamma", tr.gamma, "oja steps per eigenvector");
  train->add_option("--eta-mode", tr.eta_mode, "pgd step size rule: constant | invsqrt | invt");
  train->add_option("--eta", tr.eta, "pgd constant step size");
  train->add_option("--L", [&tr](const auto& v) { tr.L = std::stod(v[0]); return true; }, "row norm bound override");
  train->add_option("--seed", tr.seed, "seed for all noise draws");
  train->add_option("--output", tr.output, "model file to write")->required();

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "score a model on held-out ratings");
  eval->add_option("--model", ev.model, "model file from train")->required();
  eval->add_option("--test", ev.test, "indexed ratings file (user,item,rating)")->required();
  eval->add_option("--scale-lo", ev.scale_lo, "clip predictions at this minimum");
  eval->add_option("--scale-hi", ev.scale_hi, "clip predictions at this maximum");
  eval->add_flag("--no-clip", ev.no_clip, "report rmse without clipping predictions");

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep", "grid of algorithms x epsilons x seeds -> csv");
  sweep->add_option("--config", sw.config, "key = value config file");
  sweep->add_option("--set", sw.sets, "override a config key (key=value, repeatable)");
  sweep->add_option("--output", sw.output, "csv path (default stdout)");
  sweep->add_flag("--no-timing", sw.no_timing, "write 0 for wallclock_s");
  // the common keys also exist as flags so short sweeps need no file
  for (const char* key : {"dataset", "format", "algos", "eps", "seeds", "delta",
                          "master_seed", "k", "T", "r", "xi", "test_frac",
                          "scale_lo", "scale_hi", "synthetic_m", "synthetic_n",
                          "backend", "gamma", "pgd_eta", "beta", "L"}) {
    std::string flag = "--" + std::string(key);
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    sweep->add_option(flag, [&sw, key](const auto& v) {
      sw.kv[key] = v[0];
      return true;
    }, std::string("config key ") + key);
  }

  CLI::App* noise = app.add_subcommand("noise-calc", "print the per-release noise scale");
  std::string mech = "fw";
  double L = 1.0, eps = 1.0, delta = 1e-6;
  std::uint64_t rounds = 1;
  noise->add_option("--mechanism", mech, "fw | oja | svd | pgd");
  noise->add_option("--L", L, "row norm bound");
  noise->add_option("--rounds", rounds, "adaptive releases (fw/pgd: T, oja: steps)");
  noise->add_option("--eps", eps, "privacy epsilon");
  noise->add_option("--delta", delta, "privacy delta");

  // let --threads appear after the subcommand too
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  set_max_threads(threads);
  try {
    if (*ingest) return run_ingest(ing);
    if (*train) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*sweep) return run_sweep_cmd(sw);
    if (*noise) {
      Mechanism m;
      if (mech == "fw") m = Mechanism::fw;
      else if (mech == "oja") m = Mechanism::oja;
      else if (mech == "svd") m = Mechanism::svd;
      else if (mech == "pgd") m = Mechanism::pgd;
      else throw std::invalid_argument("unknown mechanism '" + mech + "'");
      const NoiseScale ns = noise_scale(m, L, rounds, {eps, delta});
      std::printf("%.6f\n", ns.sigma);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
