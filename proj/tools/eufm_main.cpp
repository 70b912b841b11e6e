// Command-line front end: closed-form solves, label-spectrum tables, training
// runs, metric evaluation of stored parameters, theory-vs-training comparisons,
// and axis sweeps. Exit codes: 0 success/pass, 1 tolerance failure,
// 2 usage or config error, 3 numerical error.

#include "eufm/eufm.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using eufm::BiasMode;
using eufm::Index;

/// Runs the config-assembly phase of a command: any failure here (unreadable
/// file, malformed keys, inconsistent lists) is a config error, not a
/// numerical one.
template <typename Fn>
auto config_phase(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(e.what());
  }
}

/// Flag values shared by train/compare/sweep; only flags the user actually
/// passed override the config file.
struct RunFlags {
  std::string config;
  std::vector<std::int64_t> counts;
  std::vector<double> lambda_w;
  double lambda_h = 0.0;
  std::vector<std::int64_t> dims;
  std::string mode;
  std::string optimizer;
  double lr = 0.0;
  std::int64_t epochs = 0;
  double grad_tol = 0.0;
  std::uint64_t seed = 0;
  std::int64_t log_every = 0;
  std::string out;
  std::string features;
  double tol_obj_rel = 0.0, tol_b_inf = 0.0, tol_product_fro = 0.0, tol_nc1 = 0.0, tol_nc = 0.0;
};

BiasMode parse_mode(const std::string& s) {
  if (s == "bias") return BiasMode::bias;
  if (s == "bias-free") return BiasMode::bias_free;
  throw std::invalid_argument("mode must be `bias` or `bias-free`");
}

eufm::Optimizer parse_optimizer(const std::string& s) {
  if (s == "plain-gd") return eufm::Optimizer::plain_gd;
  if (s == "adaptive-moment") return eufm::Optimizer::adaptive_moment;
  throw std::invalid_argument("optimizer must be `plain-gd` or `adaptive-moment`");
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "key-value config file; flags override its entries");
  cmd->add_option("--counts", f.counts, "per-class sample counts, e.g. 8,8,2,2")->delimiter(',');
  cmd->add_option("--lambda-w", f.lambda_w, "weight decay per layer, e.g. 0.01 or 0.01,0.02")
      ->delimiter(',');
  cmd->add_option("--lambda-h", f.lambda_h, "feature decay");
  cmd->add_option("--dims", f.dims, "layer input widths d0,...,d_{L-1}")->delimiter(',');
  cmd->add_option("--mode", f.mode, "bias | bias-free");
  cmd->add_option("--optimizer", f.optimizer, "plain-gd | adaptive-moment");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epochs", f.epochs, "maximum training epochs");
  cmd->add_option("--grad-tol", f.grad_tol, "stop when the gradient inf-norm falls below this");
  cmd->add_option("--seed", f.seed, "initialization seed");
  cmd->add_option("--log-every", f.log_every, "metric logging period in epochs");
  cmd->add_option("--out", f.out, "output directory for run artifacts");
  cmd->add_option("--features", f.features, "CSV of initial features (d0 x N)");
  cmd->add_option("--tol-obj-rel", f.tol_obj_rel, "pass threshold: relative objective gap");
  cmd->add_option("--tol-b-inf", f.tol_b_inf, "pass threshold: bias deviation inf-norm");
  cmd->add_option("--tol-product-fro", f.tol_product_fro, "pass threshold: product residuals");
  cmd->add_option("--tol-nc1", f.tol_nc1, "pass threshold: final NC1");
  cmd->add_option("--tol-nc", f.tol_nc, "pass threshold: final NC2/NC3");
}

eufm::ExperimentConfig build_config(const CLI::App* cmd, const RunFlags& f) {
  eufm::ExperimentConfig cfg = config_phase([&] {
    if (!f.config.empty()) return eufm::config_from_kv(eufm::KvFile::parse_file(f.config));
    return eufm::ExperimentConfig{};
  });
  if (cmd->count("--counts")) cfg.counts = f.counts;
  if (cmd->count("--lambda-w")) cfg.reg.lambda_w = f.lambda_w;
  if (cmd->count("--lambda-h")) cfg.reg.lambda_h = f.lambda_h;
  if (cmd->count("--dims")) {
    cfg.dims.widths.clear();
    for (std::int64_t d : f.dims) cfg.dims.widths.push_back(static_cast<Index>(d));
  }
  if (cmd->count("--mode")) cfg.mode = parse_mode(f.mode);
  if (cmd->count("--optimizer")) cfg.train.optimizer = parse_optimizer(f.optimizer);
  if (cmd->count("--lr")) cfg.train.lr = f.lr;
  if (cmd->count("--epochs")) cfg.train.max_epochs = f.epochs;
  if (cmd->count("--grad-tol")) cfg.train.grad_tol = f.grad_tol;
  if (cmd->count("--seed")) cfg.train.seed = f.seed;
  if (cmd->count("--log-every")) cfg.train.log_every = f.log_every;
  if (cmd->count("--out")) cfg.out_dir = f.out;
  if (cmd->count("--features")) cfg.features_path = f.features;
  if (cmd->count("--tol-obj-rel")) cfg.tol.obj_rel = f.tol_obj_rel;
  if (cmd->count("--tol-b-inf")) cfg.tol.b_inf = f.tol_b_inf;
  if (cmd->count("--tol-product-fro")) cfg.tol.product_fro = f.tol_product_fro;
  if (cmd->count("--tol-nc1")) cfg.tol.nc1 = f.tol_nc1;
  if (cmd->count("--tol-nc")) cfg.tol.nc = f.tol_nc;
  cfg.validate();
  return cfg;
}

const char* source_name(eufm::SpectrumSource s) {
  return s == eufm::SpectrumSource::group_repeat ? "group-repeat" : "reduced-matrix";
}

int cmd_spectra(const std::vector<std::int64_t>& counts, const std::string& out) {
  const eufm::ImbalanceSpec spec = config_phase([&] { return eufm::spec_from_counts(counts); });
  const eufm::GroupSpectrum gs = eufm::full_spectrum(spec);
  std::cout << "classes " << spec.num_classes() << ", samples " << spec.total_samples << ", groups "
            << spec.num_groups() << "\n";
  std::cout << "singular values of the centered label matrix:\n";
  std::cout.precision(17);
  for (const eufm::SpectrumEntry& e : gs.multiplicities)
    std::cout << "  " << e.value << "  multiplicity " << e.multiplicity << "  [" << source_name(e.source)
              << "]\n";
  if (!out.empty()) {
    std::ofstream csv(out);
    if (!csv) throw std::runtime_error("cannot open for writing: " + out);
    csv.precision(17);
    csv << "value,multiplicity,source\n";
    for (const eufm::SpectrumEntry& e : gs.multiplicities)
      csv << e.value << ',' << e.multiplicity << ',' << source_name(e.source) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_solve(const CLI::App* cmd, const RunFlags& f) {
  eufm::ExperimentConfig cfg = build_config(cmd, f);
  const eufm::ImbalanceSpec spec = eufm::spec_from_counts(cfg.counts);
  if (cfg.mode == BiasMode::bias_free && cfg.reg.layers() > 1)
    throw std::invalid_argument("bias-free mode has a closed-form solution only for single-layer models");
  const eufm::AnalyticSolution sol = cfg.mode == BiasMode::bias
                                         ? eufm::solve_deep(spec, cfg.reg, cfg.dims)
                                         : eufm::solve_biasfree_ufm(spec, cfg.reg, cfg.dims.d0());
  std::cout.precision(17);
  std::cout << "optimal objective " << sol.f_star << "\n";
  std::cout << "singular values:";
  for (Index k = 0; k < sol.sigma_star.size(); ++k) std::cout << ' ' << sol.sigma_star(k);
  std::cout << "\n";
  if (sol.b_star.size() > 0) {
    std::cout << "optimal bias:";
    for (Index k = 0; k < sol.b_star.size(); ++k) std::cout << ' ' << sol.b_star(k);
    std::cout << "\n";
  }
  if (sol.rank_truncated) std::cout << "note: layer widths truncate the representable rank\n";
  if (cmd->count("--out")) {
    eufm::save_params(cfg.out_dir, sol.canonical, &spec, &cfg.reg);
    std::ofstream kv(cfg.out_dir / "solution.kv");
    if (!kv) throw std::runtime_error("cannot open for writing: " + (cfg.out_dir / "solution.kv").string());
    kv.precision(17);
    kv << "f_star = " << sol.f_star << "\n";
    kv << "sigma_star = [";
    for (Index k = 0; k < sol.sigma_star.size(); ++k) kv << (k ? ", " : "") << sol.sigma_star(k);
    kv << "]\n";
    if (sol.b_star.size() > 0) {
      kv << "b_star = [";
      for (Index k = 0; k < sol.b_star.size(); ++k) kv << (k ? ", " : "") << sol.b_star(k);
      kv << "]\n";
    }
    kv << "rank_truncated = " << (sol.rank_truncated ? 1 : 0) << "\n";
    std::cout << "wrote canonical minimizer to " << cfg.out_dir.string() << "\n";
  }
  return 0;
}

int cmd_train(const CLI::App* cmd, const RunFlags& f) {
  const eufm::ExperimentConfig cfg = build_config(cmd, f);
  const eufm::ImbalanceSpec spec = eufm::spec_from_counts(cfg.counts);
  std::optional<eufm::Matrix> h0;
  if (cfg.features_path)
    h0 = config_phase([&] { return eufm::import_features(*cfg.features_path, spec, cfg.dims.d0()); });
  const eufm::TrainTrajectory traj =
      eufm::train(cfg.train, spec, cfg.reg, cfg.dims, cfg.mode, h0 ? &*h0 : nullptr);
  fs::create_directories(cfg.out_dir);
  eufm::write_config_snapshot(cfg.out_dir / "config.kv", cfg);
  eufm::write_metrics_csv(cfg.out_dir / "metrics.csv", traj.records);
  eufm::save_params(cfg.out_dir / "params", traj.final_params, &spec, &cfg.reg);
  std::cout.precision(17);
  std::cout << "trained " << traj.epochs_run << " epochs, final objective " << traj.final_objective
            << (traj.hit_tolerance ? " (gradient tolerance reached)" : "") << "\n";
  std::cout << "wrote " << (cfg.out_dir / "metrics.csv").string() << " and "
            << (cfg.out_dir / "params").string() << "\n";
  return 0;
}

/// Flags for the metrics subcommand; regularization context falls back to the
/// stored manifest when not given.
struct MetricsFlags {
  std::string params;
  std::vector<std::int64_t> counts;
  std::vector<double> lambda_w;
  double lambda_h = 0.0;
  std::string out;
};

int cmd_metrics(const CLI::App* cmd, const MetricsFlags& f) {
  const eufm::ModelParams p = config_phase([&] { return eufm::load_params(f.params); });
  const eufm::ParamsManifest man = config_phase([&] { return eufm::load_manifest(f.params); });

  std::vector<std::int64_t> counts;
  if (cmd->count("--counts"))
    counts = f.counts;
  else if (man.counts)
    counts = *man.counts;
  else
    throw std::invalid_argument("class counts unavailable: pass --counts or store them in the manifest");
  eufm::RegParams reg;
  if (cmd->count("--lambda-w"))
    reg.lambda_w = f.lambda_w;
  else if (man.lambda_w)
    reg.lambda_w = *man.lambda_w;
  else
    throw std::invalid_argument("lambda_w unavailable: pass --lambda-w or store it in the manifest");
  if (cmd->count("--lambda-h"))
    reg.lambda_h = f.lambda_h;
  else if (man.lambda_h)
    reg.lambda_h = *man.lambda_h;
  else
    throw std::invalid_argument("lambda_h unavailable: pass --lambda-h or store it in the manifest");
  if (reg.layers() != p.layers())
    throw std::invalid_argument("lambda_w length does not match the stored layer count");

  const eufm::ImbalanceSpec spec = config_phase([&] { return eufm::spec_from_counts(counts); });
  const eufm::LabelAlgebra la = eufm::label_algebra(spec);
  if (p.h.cols() != static_cast<Index>(spec.total_samples))
    throw std::invalid_argument("stored features do not match the class counts");

  eufm::Dims dims;
  for (const eufm::Matrix& w : p.weights) dims.widths.push_back(w.cols());

  eufm::NCReport nc;
  if (p.has_bias()) {
    const eufm::AnalyticSolution sol = eufm::solve_deep(spec, reg, dims);
    nc = eufm::nc_report(p, la, sol);
  } else if (p.layers() == 1) {
    const eufm::AnalyticSolution sol = eufm::solve_biasfree_ufm(spec, reg, dims.d0());
    nc = eufm::nc_report(p, la, sol);
  } else {
    nc.nc1 = eufm::nc1(p.h, spec, &nc.nc1_degenerate);
    nc.nc2_degenerate = true;
    nc.nc3_degenerate = true;
  }
  const double obj = eufm::objective(p, la, reg);
  const double acc = eufm::predict_accuracy(p, la);

  std::ostringstream row;
  row.precision(17);
  row << obj << ',' << nc.nc1 << ',' << nc.nc2w << ',' << nc.nc2h << ',' << nc.nc2wh << ',' << nc.nc3
      << ',' << acc << ',' << (nc.nc1_degenerate ? 1 : 0) << ',' << (nc.nc2_degenerate ? 1 : 0) << ','
      << (nc.nc3_degenerate ? 1 : 0) << ',' << (nc.nc3_inconsistent ? 1 : 0);
  const std::string header =
      "objective,nc1,nc2w,nc2h,nc2wh,nc3,accuracy,nc1_degenerate,nc2_degenerate,nc3_degenerate,"
      "nc3_inconsistent";
  std::cout << header << "\n" << row.str() << "\n";
  if (cmd->count("--out")) {
    std::ofstream csv(f.out);
    if (!csv) throw std::runtime_error("cannot open for writing: " + f.out);
    csv << header << "\n" << row.str() << "\n";
  }
  return 0;
}

int cmd_compare(const CLI::App* cmd, const RunFlags& f) {
  const eufm::ExperimentConfig cfg = build_config(cmd, f);
  const eufm::ComparisonReport rep = eufm::run_experiment(cfg);
  std::cout.precision(10);
  std::cout << "optimal objective " << rep.f_star << ", trained " << rep.f_trained << " (rel gap "
            << rep.obj_gap_rel << ")\n";
  if (cfg.mode == BiasMode::bias) std::cout << "bias deviation " << rep.b_dev << "\n";
  std::cout << "final metrics: nc1 " << rep.final_nc.nc1 << ", nc2w " << rep.final_nc.nc2w << ", nc2h "
            << rep.final_nc.nc2h << ", nc2wh " << rep.final_nc.nc2wh << ", nc3 " << rep.final_nc.nc3
            << "\n";
  std::cout << "report written to " << (cfg.out_dir / "report.txt").string() << "\n";
  std::cout << "verdict: " << (rep.passed ? "PASS" : "FAIL") << "\n";
  return rep.passed ? 0 : 1;
}

int cmd_sweep(const CLI::App* cmd, const RunFlags& f, const std::string& axis,
              const std::vector<double>& values, const std::string& out_root) {
  eufm::ExperimentConfig base = build_config(cmd, f);
  eufm::SweepAxis ax;
  if (axis == "lambda")
    ax = eufm::SweepAxis::lambda;
  else if (axis == "ratio")
    ax = eufm::SweepAxis::imbalance_ratio;
  else if (axis == "layers")
    ax = eufm::SweepAxis::layers;
  else
    throw std::invalid_argument("axis must be `lambda`, `ratio`, or `layers`");
  const std::vector<eufm::SweepRow> rows = eufm::sweep(base, ax, values, out_root);
  bool all_passed = true;
  std::cout.precision(10);
  for (const eufm::SweepRow& row : rows) {
    std::cout << axis << " = " << row.value << ": ";
    if (row.report) {
      std::cout << (row.report->passed ? "PASS" : "FAIL") << " (objective " << row.report->f_trained
                << ", optimal " << row.report->f_star << ")\n";
      all_passed = all_passed && row.report->passed;
    } else {
      std::cout << "error: " << row.error << "\n";
      all_passed = false;
    }
  }
  std::cout << "wrote " << (fs::path(out_root) / "sweep.csv").string() << "\n";
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  eufm::apply_thread_cap_from_env();
  CLI::App app{
      "Closed-form minimizers, label spectra, training, and collapse metrics\n"
      "for linear models with free features under regularized MSE."};
  app.require_subcommand(1);

  std::vector<std::int64_t> spectra_counts;
  std::string spectra_out;
  CLI::App* spectra = app.add_subcommand("spectra", "singular-value table of the centered label matrix");
  spectra->add_option("--counts", spectra_counts, "per-class sample counts, e.g. 8,8,2,2")
      ->delimiter(',')
      ->required();
  spectra->add_option("--out", spectra_out, "also write the table as CSV");

  RunFlags solve_flags;
  CLI::App* solve = app.add_subcommand("solve", "closed-form global minimizer and optimal objective");
  add_run_flags(solve, solve_flags);

  RunFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "gradient training with metric logging");
  add_run_flags(train, train_flags);

  MetricsFlags metrics_flags;
  CLI::App* metrics = app.add_subcommand("metrics", "collapse metrics of stored parameters");
  metrics->add_option("--params", metrics_flags.params, "parameter directory written by train/solve")
      ->required();
  metrics->add_option("--counts", metrics_flags.counts, "per-class sample counts, e.g. 8,8,2,2")
      ->delimiter(',');
  metrics->add_option("--lambda-w", metrics_flags.lambda_w, "weight decay per layer")->delimiter(',');
  metrics->add_option("--lambda-h", metrics_flags.lambda_h, "feature decay");
  metrics->add_option("--out", metrics_flags.out, "also write the metric row as CSV");

  RunFlags compare_flags;
  CLI::App* compare = app.add_subcommand("compare", "train and compare against the closed form");
  add_run_flags(compare, compare_flags);

  RunFlags sweep_flags;
  std::string sweep_axis = "lambda";
  std::vector<double> sweep_values;
  std::string sweep_out = "sweep";
  CLI::App* sweep = app.add_subcommand("sweep", "repeat a comparison along one axis");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--axis", sweep_axis, "lambda | ratio | layers");
  sweep->add_option("--values", sweep_values, "axis values, e.g. 0.1,0.01,0.001")->delimiter(',');
  sweep->add_option("--sweep-out", sweep_out, "root directory for per-value runs and sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(spectra)) return cmd_spectra(spectra_counts, spectra_out);
    if (app.got_subcommand(solve)) return cmd_solve(solve, solve_flags);
    if (app.got_subcommand(train)) return cmd_train(train, train_flags);
    if (app.got_subcommand(metrics)) return cmd_metrics(metrics, metrics_flags);
    if (app.got_subcommand(compare)) return cmd_compare(compare, compare_flags);
    if (app.got_subcommand(sweep))
      return cmd_sweep(sweep, sweep_flags, sweep_axis, sweep_values, sweep_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
