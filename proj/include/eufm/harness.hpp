#pragma once

// Experiment orchestration: config files, theory-vs-training comparison runs
// with serialized reports, axis sweeps, and external feature import.

#include "eufm/analytic.hpp"
#include "eufm/kvfile.hpp"
#include "eufm/metrics.hpp"
#include "eufm/model.hpp"
#include "eufm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace eufm {

/// Caps Eigen's internal parallelism from the EUFM_MAX_THREADS environment
/// variable (no-op when unset or unparsable).
inline void apply_thread_cap_from_env() {
  if (const char* v = std::getenv("EUFM_MAX_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && n > 0) Eigen::setNbThreads(static_cast<int>(n));
  }
}

/// Pass/fail thresholds for a comparison run.
struct Tolerances {
  double obj_rel = 1e-6;      // |trained - f*| / max(|f*|, eps)
  double b_inf = 1e-3;        // inf-norm bias deviation (bias mode)
  double product_fro = 1e-8;  // canonical product-identity residuals
  double nc1 = 1e-3;          // final NC1
  double nc = 1e-2;           // final NC2w / NC2h / NC2wh / NC3
};

struct ExperimentConfig {
  std::vector<std::int64_t> counts;
  RegParams reg;
  Dims dims;
  BiasMode mode = BiasMode::bias;
  TrainConfig train;
  std::filesystem::path out_dir = "run";
  Tolerances tol;
  std::optional<std::filesystem::path> features_path;

  void validate() const {
    if (counts.size() < 2) throw std::invalid_argument("config: need at least two classes");
    reg.validate();
    dims.validate();
    if (reg.layers() != dims.layers())
      throw std::invalid_argument("config: lambda_w and dims disagree on layer count");
  }
};

/// Measured Frobenius deviations of a parameter set's invariant products from
/// an analytic solution's predictions (same frames as the NC2 suite).
struct ProductDeviations {
  double wh = 0.0;
  double ww = 0.0;
  double hh = 0.0;
  double wlast = 0.0;
};

inline ProductDeviations product_deviations(const ModelParams& p, const LabelAlgebra& la,
                                            const AnalyticSolution& sol) {
  const Matrix a = p.product();
  const Matrix h_bar = class_stats(p.h, la.spec).class_means;
  ProductDeviations dev;
  if (sol.mode == SolveMode::biasfree_ufm) {
    dev.ww = (a * a.transpose() - sol.product_ww).norm();
    dev.hh = (h_bar.transpose() * h_bar - sol.product_hh).norm();
    dev.wh = (a * h_bar - sol.product_wh).norm();
    dev.wlast = dev.ww;
    return dev;
  }
  const Matrix g = h_bar * la.d * la.svd.v;
  const Matrix& wl = p.weights.back();
  dev.ww = (la.svd.u.transpose() * a * a.transpose() * la.svd.u - sol.product_ww).norm();
  dev.hh = (g.transpose() * g - sol.product_hh).norm();
  dev.wh = (la.svd.u.transpose() * a * g - sol.product_wh).norm();
  dev.wlast = (la.svd.u.transpose() * wl * wl.transpose() * la.svd.u - sol.product_wlast).norm();
  return dev;
}

/// Outcome of one theory-vs-training comparison.
struct ComparisonReport {
  double f_star = 0.0;
  double f_trained = 0.0;
  double obj_gap_abs = 0.0;
  double obj_gap_rel = 0.0;
  double b_dev = 0.0;  // 0 in bias-free mode
  ProductDeviations canonical_dev;
  ProductDeviations trained_dev;
  NCReport final_nc;
  double final_accuracy = 0.0;
  std::int64_t epochs_run = 0;
  bool hit_tolerance = false;
  bool rank_truncated = false;
  double runtime_seconds = 0.0;
  bool pass_objective = false;
  bool pass_bias = false;
  bool pass_products = false;
  bool pass_nc = false;
  bool passed = false;
};

/// Applies tolerances to recorded deviations. The verdict is a pure function
/// of (deviations, flags, tolerances).
inline void evaluate_verdict(ComparisonReport& rep, const Tolerances& tol, BiasMode mode) {
  rep.pass_objective = rep.obj_gap_rel <= tol.obj_rel;
  rep.pass_bias = (mode == BiasMode::bias_free) || rep.b_dev <= tol.b_inf;
  rep.pass_products = rep.canonical_dev.wh <= tol.product_fro && rep.canonical_dev.ww <= tol.product_fro &&
                      rep.canonical_dev.hh <= tol.product_fro && rep.canonical_dev.wlast <= tol.product_fro;
  const NCReport& nc = rep.final_nc;
  const bool nc1_ok = nc.nc1_degenerate || nc.nc1 <= tol.nc1;
  const bool nc2_ok = nc.nc2_degenerate ||
                      (nc.nc2w <= tol.nc && nc.nc2h <= tol.nc && nc.nc2wh <= tol.nc);
  const bool nc3_ok = nc.nc3_degenerate || (nc.nc3 <= tol.nc && !nc.nc3_inconsistent);
  rep.pass_nc = nc1_ok && nc2_ok && nc3_ok;
  rep.passed = rep.pass_objective && rep.pass_bias && rep.pass_products && rep.pass_nc;
}

namespace detail {

inline std::string fmt17(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline void write_report_kv(const std::filesystem::path& path, const ComparisonReport& r,
                            const Tolerances& tol, BiasMode mode) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "mode = " << (mode == BiasMode::bias ? "bias" : "bias-free") << "\n";
  out << "f_star = " << fmt17(r.f_star) << "\n";
  out << "f_trained = " << fmt17(r.f_trained) << "\n";
  out << "obj_gap_abs = " << fmt17(r.obj_gap_abs) << "\n";
  out << "obj_gap_rel = " << fmt17(r.obj_gap_rel) << "\n";
  out << "b_dev = " << fmt17(r.b_dev) << "\n";
  out << "canonical_dev_wh = " << fmt17(r.canonical_dev.wh) << "\n";
  out << "canonical_dev_ww = " << fmt17(r.canonical_dev.ww) << "\n";
  out << "canonical_dev_hh = " << fmt17(r.canonical_dev.hh) << "\n";
  out << "canonical_dev_wlast = " << fmt17(r.canonical_dev.wlast) << "\n";
  out << "trained_dev_wh = " << fmt17(r.trained_dev.wh) << "\n";
  out << "trained_dev_ww = " << fmt17(r.trained_dev.ww) << "\n";
  out << "trained_dev_hh = " << fmt17(r.trained_dev.hh) << "\n";
  out << "nc1 = " << fmt17(r.final_nc.nc1) << "\n";
  out << "nc2w = " << fmt17(r.final_nc.nc2w) << "\n";
  out << "nc2h = " << fmt17(r.final_nc.nc2h) << "\n";
  out << "nc2wh = " << fmt17(r.final_nc.nc2wh) << "\n";
  out << "nc3 = " << fmt17(r.final_nc.nc3) << "\n";
  out << "nc1_degenerate = " << (r.final_nc.nc1_degenerate ? 1 : 0) << "\n";
  out << "nc2_degenerate = " << (r.final_nc.nc2_degenerate ? 1 : 0) << "\n";
  out << "nc3_degenerate = " << (r.final_nc.nc3_degenerate ? 1 : 0) << "\n";
  out << "nc3_inconsistent = " << (r.final_nc.nc3_inconsistent ? 1 : 0) << "\n";
  out << "accuracy = " << fmt17(r.final_accuracy) << "\n";
  out << "epochs_run = " << r.epochs_run << "\n";
  out << "hit_tolerance = " << (r.hit_tolerance ? 1 : 0) << "\n";
  out << "rank_truncated = " << (r.rank_truncated ? 1 : 0) << "\n";
  out << "runtime_seconds = " << fmt17(r.runtime_seconds) << "\n";
  out << "tol_obj_rel = " << fmt17(tol.obj_rel) << "\n";
  out << "tol_b_inf = " << fmt17(tol.b_inf) << "\n";
  out << "tol_product_fro = " << fmt17(tol.product_fro) << "\n";
  out << "tol_nc1 = " << fmt17(tol.nc1) << "\n";
  out << "tol_nc = " << fmt17(tol.nc) << "\n";
  out << "pass_objective = " << (r.pass_objective ? 1 : 0) << "\n";
  out << "pass_bias = " << (r.pass_bias ? 1 : 0) << "\n";
  out << "pass_products = " << (r.pass_products ? 1 : 0) << "\n";
  out << "pass_nc = " << (r.pass_nc ? 1 : 0) << "\n";
  out << "passed = " << (r.passed ? 1 : 0) << "\n";
}

inline void write_report_text(const std::filesystem::path& path, const ComparisonReport& r,
                              BiasMode mode) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << std::setprecision(10);
  out << "comparison report (" << (mode == BiasMode::bias ? "bias" : "bias-free") << " mode)\n";
  out << "  optimal objective      " << r.f_star << "\n";
  out << "  trained objective      " << r.f_trained << " (rel gap " << r.obj_gap_rel << ")\n";
  if (mode == BiasMode::bias) out << "  bias deviation         " << r.b_dev << "\n";
  out << "  canonical identity residuals: wh " << r.canonical_dev.wh << ", ww " << r.canonical_dev.ww
      << ", hh " << r.canonical_dev.hh << ", wlast " << r.canonical_dev.wlast << "\n";
  out << "  trained product residuals:    wh " << r.trained_dev.wh << ", ww " << r.trained_dev.ww
      << ", hh " << r.trained_dev.hh << "\n";
  out << "  final metrics: nc1 " << r.final_nc.nc1 << ", nc2w " << r.final_nc.nc2w << ", nc2h "
      << r.final_nc.nc2h << ", nc2wh " << r.final_nc.nc2wh << ", nc3 " << r.final_nc.nc3
      << ", accuracy " << r.final_accuracy << "\n";
  out << "  epochs " << r.epochs_run << (r.hit_tolerance ? " (gradient tolerance reached)" : "")
      << ", " << r.runtime_seconds << " s\n";
  out << "  verdict: " << (r.passed ? "PASS" : "FAIL") << " (objective "
      << (r.pass_objective ? "pass" : "FAIL") << ", bias " << (r.pass_bias ? "pass" : "FAIL")
      << ", products " << (r.pass_products ? "pass" : "FAIL") << ", metrics "
      << (r.pass_nc ? "pass" : "FAIL") << ")\n";
}

}  // namespace detail

/// Re-derives the verdict from a stored report.kv (pure function of recorded
/// deviations and tolerances; used to audit stored reports).
inline bool verdict_from_report_file(const std::filesystem::path& path) {
  const KvFile kv = KvFile::parse_file(path);
  ComparisonReport r;
  r.obj_gap_rel = kv.get_f64("obj_gap_rel");
  r.b_dev = kv.get_f64("b_dev");
  r.canonical_dev.wh = kv.get_f64("canonical_dev_wh");
  r.canonical_dev.ww = kv.get_f64("canonical_dev_ww");
  r.canonical_dev.hh = kv.get_f64("canonical_dev_hh");
  r.canonical_dev.wlast = kv.get_f64("canonical_dev_wlast");
  r.final_nc.nc1 = kv.get_f64("nc1");
  r.final_nc.nc2w = kv.get_f64("nc2w");
  r.final_nc.nc2h = kv.get_f64("nc2h");
  r.final_nc.nc2wh = kv.get_f64("nc2wh");
  r.final_nc.nc3 = kv.get_f64("nc3");
  r.final_nc.nc1_degenerate = kv.get_i64("nc1_degenerate") != 0;
  r.final_nc.nc2_degenerate = kv.get_i64("nc2_degenerate") != 0;
  r.final_nc.nc3_degenerate = kv.get_i64("nc3_degenerate") != 0;
  r.final_nc.nc3_inconsistent = kv.get_i64("nc3_inconsistent") != 0;
  Tolerances tol;
  tol.obj_rel = kv.get_f64("tol_obj_rel");
  tol.b_inf = kv.get_f64("tol_b_inf");
  tol.product_fro = kv.get_f64("tol_product_fro");
  tol.nc1 = kv.get_f64("tol_nc1");
  tol.nc = kv.get_f64("tol_nc");
  const BiasMode mode = kv.get_str("mode") == "bias" ? BiasMode::bias : BiasMode::bias_free;
  evaluate_verdict(r, tol, mode);
  return r.passed;
}

/// Loads a d0 x N feature matrix for use as training initialization.
inline Matrix import_features(const std::filesystem::path& path, const ImbalanceSpec& spec,
                              Index expected_rows = -1) {
  const Matrix h = read_matrix_csv(path);
  if (h.cols() != static_cast<Index>(spec.total_samples))
    throw std::invalid_argument("imported features: expected " +
                                std::to_string(spec.total_samples) + " columns, got " +
                                std::to_string(h.cols()));
  if (expected_rows >= 0 && h.rows() != expected_rows)
    throw std::invalid_argument("imported features: expected " + std::to_string(expected_rows) +
                                " rows, got " + std::to_string(h.rows()));
  return h;
}

/// Writes the resolved config into the run directory for reproduction.
inline void write_config_snapshot(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "counts = [";
  for (std::size_t i = 0; i < cfg.counts.size(); ++i) out << (i ? ", " : "") << cfg.counts[i];
  out << "]\n";
  out << "layers = " << cfg.reg.layers() << "\n";
  out << "lambda_w = [";
  for (std::size_t i = 0; i < cfg.reg.lambda_w.size(); ++i)
    out << (i ? ", " : "") << detail::fmt17(cfg.reg.lambda_w[i]);
  out << "]\n";
  out << "lambda_h = " << detail::fmt17(cfg.reg.lambda_h) << "\n";
  out << "dims = [";
  for (std::size_t i = 0; i < cfg.dims.widths.size(); ++i) out << (i ? ", " : "") << cfg.dims.widths[i];
  out << "]\n";
  out << "mode = " << (cfg.mode == BiasMode::bias ? "bias" : "bias-free") << "\n";
  out << "optimizer = " << (cfg.train.optimizer == Optimizer::plain_gd ? "plain-gd" : "adaptive-moment") << "\n";
  out << "lr = " << detail::fmt17(cfg.train.lr) << "\n";
  out << "max_epochs = " << cfg.train.max_epochs << "\n";
  out << "grad_tol = " << detail::fmt17(cfg.train.grad_tol) << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "log_every = " << cfg.train.log_every << "\n";
  if (cfg.features_path) out << "features = " << cfg.features_path->string() << "\n";
  out << "tol_obj_rel = " << detail::fmt17(cfg.tol.obj_rel) << "\n";
  out << "tol_b_inf = " << detail::fmt17(cfg.tol.b_inf) << "\n";
  out << "tol_product_fro = " << detail::fmt17(cfg.tol.product_fro) << "\n";
  out << "tol_nc1 = " << detail::fmt17(cfg.tol.nc1) << "\n";
  out << "tol_nc = " << detail::fmt17(cfg.tol.nc) << "\n";
}

/// Parses an ExperimentConfig from a key-value file. `layers` (when present)
/// must agree with the lambda_w and dims list lengths: lists are never
/// silently replicated.
inline ExperimentConfig config_from_kv(const KvFile& kv) {
  ExperimentConfig cfg;
  cfg.counts = kv.get_i64_list("counts");
  cfg.reg.lambda_w = kv.get_f64_list("lambda_w");
  cfg.reg.lambda_h = kv.get_f64("lambda_h");
  for (std::int64_t d : kv.get_i64_list("dims")) cfg.dims.widths.push_back(static_cast<Index>(d));
  if (kv.has("layers")) {
    const auto layers = kv.get_i64("layers");
    if (layers != static_cast<std::int64_t>(cfg.reg.lambda_w.size()))
      throw std::invalid_argument("config: layers does not match lambda_w length");
    if (layers != static_cast<std::int64_t>(cfg.dims.widths.size()))
      throw std::invalid_argument("config: layers does not match dims length");
  }
  const std::string mode = kv.get_str("mode", "bias");
  if (mode == "bias")
    cfg.mode = BiasMode::bias;
  else if (mode == "bias-free")
    cfg.mode = BiasMode::bias_free;
  else
    throw std::invalid_argument("config: mode must be `bias` or `bias-free`");
  const std::string opt = kv.get_str("optimizer", "adaptive-moment");
  if (opt == "plain-gd")
    cfg.train.optimizer = Optimizer::plain_gd;
  else if (opt == "adaptive-moment")
    cfg.train.optimizer = Optimizer::adaptive_moment;
  else
    throw std::invalid_argument("config: optimizer must be `plain-gd` or `adaptive-moment`");
  cfg.train.lr = kv.get_f64("lr", cfg.train.lr);
  cfg.train.max_epochs = kv.get_i64("max_epochs", cfg.train.max_epochs);
  cfg.train.grad_tol = kv.get_f64("grad_tol", cfg.train.grad_tol);
  cfg.train.seed = static_cast<std::uint64_t>(kv.get_i64("seed", 0));
  cfg.train.log_every = kv.get_i64("log_every", cfg.train.log_every);
  cfg.out_dir = kv.get_str("out", "run");
  if (kv.has("features")) cfg.features_path = kv.get_str("features");
  cfg.tol.obj_rel = kv.get_f64("tol_obj_rel", cfg.tol.obj_rel);
  cfg.tol.b_inf = kv.get_f64("tol_b_inf", cfg.tol.b_inf);
  cfg.tol.product_fro = kv.get_f64("tol_product_fro", cfg.tol.product_fro);
  cfg.tol.nc1 = kv.get_f64("tol_nc1", cfg.tol.nc1);
  cfg.tol.nc = kv.get_f64("tol_nc", cfg.tol.nc);
  cfg.validate();
  return cfg;
}

/// Solve, train, measure, and serialize one experiment into cfg.out_dir:
/// config.kv (snapshot), metrics.csv, params/ (trained), canonical/ (analytic),
/// report.txt, report.kv.
inline ComparisonReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.mode == BiasMode::bias_free && cfg.reg.layers() > 1)
    throw std::invalid_argument("config: bias-free mode has an analytic reference only for single-layer models");
  const auto t0 = std::chrono::steady_clock::now();
  const ImbalanceSpec spec = spec_from_counts(cfg.counts);
  const LabelAlgebra la = label_algebra(spec);
  const AnalyticSolution sol = (cfg.mode == BiasMode::bias)
                                   ? solve_deep(spec, cfg.reg, cfg.dims)
                                   : solve_biasfree_ufm(spec, cfg.reg, cfg.dims.d0());

  std::filesystem::create_directories(cfg.out_dir);
  write_config_snapshot(cfg.out_dir / "config.kv", cfg);

  std::optional<Matrix> h0;
  if (cfg.features_path) h0 = import_features(*cfg.features_path, spec, cfg.dims.d0());
  const TrainTrajectory traj =
      train(cfg.train, spec, cfg.reg, cfg.dims, cfg.mode, h0 ? &*h0 : nullptr);

  write_metrics_csv(cfg.out_dir / "metrics.csv", traj.records);
  save_params(cfg.out_dir / "params", traj.final_params, &spec, &cfg.reg);
  save_params(cfg.out_dir / "canonical", sol.canonical, &spec, &cfg.reg);

  ComparisonReport rep;
  rep.f_star = sol.f_star;
  rep.f_trained = traj.final_objective;
  rep.obj_gap_abs = std::abs(traj.final_objective - sol.f_star);
  rep.obj_gap_rel = rep.obj_gap_abs / std::max(std::abs(sol.f_star), 1e-300);
  if (cfg.mode == BiasMode::bias)
    rep.b_dev = (traj.final_params.b - target_bias(spec)).cwiseAbs().maxCoeff();
  rep.canonical_dev = product_deviations(sol.canonical, la, sol);
  rep.trained_dev = product_deviations(traj.final_params, la, sol);
  rep.final_nc = traj.records.back().nc;
  rep.final_accuracy = traj.records.back().accuracy;
  rep.epochs_run = traj.epochs_run;
  rep.hit_tolerance = traj.hit_tolerance;
  rep.rank_truncated = sol.rank_truncated;
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  evaluate_verdict(rep, cfg.tol, cfg.mode);
  detail::write_report_kv(cfg.out_dir / "report.kv", rep, cfg.tol, cfg.mode);
  detail::write_report_text(cfg.out_dir / "report.txt", rep, cfg.mode);
  return rep;
}

enum class SweepAxis { lambda, imbalance_ratio, layers };

struct SweepRow {
  double value = 0.0;
  std::optional<ComparisonReport> report;
  std::string error;  // empty on success
};

namespace detail {

/// Rescales counts so max/min -> ratio while the smallest class stays fixed
/// (affine in the original counts; requires an imbalanced base spec).
inline std::vector<std::int64_t> rescale_counts(const std::vector<std::int64_t>& counts, double ratio) {
  if (!(ratio >= 1.0)) throw std::invalid_argument("imbalance ratio must be >= 1");
  std::int64_t lo = counts.front(), hi = counts.front();
  for (std::int64_t c : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  if (lo == hi) throw std::invalid_argument("imbalance-ratio sweep needs an imbalanced base spec");
  std::vector<std::int64_t> out;
  const double lo_d = static_cast<double>(lo);
  const double hi_d = static_cast<double>(hi);
  for (std::int64_t c : counts) {
    const double frac = (static_cast<double>(c) - lo_d) / (hi_d - lo_d);
    const double scaled = lo_d + (ratio - 1.0) * lo_d * frac;
    out.push_back(std::max<std::int64_t>(1, std::llround(scaled)));
  }
  return out;
}

}  // namespace detail

/// Runs one experiment per axis value under out_root/<axis>_<index>/ and
/// writes an aggregate sweep.csv. Per-run failures are recorded as error rows;
/// the sweep continues.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                                   const std::vector<double>& values,
                                   const std::filesystem::path& out_root) {
  std::filesystem::create_directories(out_root);
  std::vector<SweepRow> rows;
  const char* axis_name = axis == SweepAxis::lambda         ? "lambda"
                          : axis == SweepAxis::imbalance_ratio ? "ratio"
                                                                 : "layers";
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row;
    row.value = values[i];
    ExperimentConfig cfg = base;
    cfg.out_dir = out_root / (std::string(axis_name) + "_" + std::to_string(i));
    try {
      switch (axis) {
        case SweepAxis::lambda:
          if (!(values[i] > 0.0)) throw std::invalid_argument("lambda must be positive");
          for (double& l : cfg.reg.lambda_w) l = values[i];
          cfg.reg.lambda_h = values[i];
          break;
        case SweepAxis::imbalance_ratio:
          cfg.counts = detail::rescale_counts(base.counts, values[i]);
          break;
        case SweepAxis::layers: {
          const int num_layers = static_cast<int>(values[i]);
          if (num_layers < 1 || static_cast<double>(num_layers) != values[i])
            throw std::invalid_argument("layers value must be a positive integer");
          cfg.reg.lambda_w.assign(static_cast<std::size_t>(num_layers), base.reg.lambda_w.front());
          cfg.dims.widths.assign(static_cast<std::size_t>(num_layers), base.dims.d0());
          break;
        }
      }
      row.report = run_experiment(cfg);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::ofstream out(out_root / "sweep.csv");
  out << "value,passed,f_star,f_trained,obj_gap_rel,b_dev,nc1,nc2w,nc2h,nc2wh,nc3,accuracy,error\n";
  out.precision(17);
  for (const SweepRow& row : rows) {
    out << row.value << ',';
    if (row.report) {
      const ComparisonReport& r = *row.report;
      out << (r.passed ? 1 : 0) << ',' << r.f_star << ',' << r.f_trained << ',' << r.obj_gap_rel << ','
          << r.b_dev << ',' << r.final_nc.nc1 << ',' << r.final_nc.nc2w << ',' << r.final_nc.nc2h << ','
          << r.final_nc.nc2wh << ',' << r.final_nc.nc3 << ',' << r.final_accuracy << ",\n";
    } else {
      std::string msg = row.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      out << ",,,,,,,,,,," << msg << "\n";
    }
  }
  return rows;
}

}  // namespace eufm
