#pragma once

// Deterministic full-batch first-order training of the model, with per-epoch
// metric logging against the analytic reference solution.

#include "eufm/analytic.hpp"
#include "eufm/metrics.hpp"
#include "eufm/model.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace eufm {

enum class Optimizer { plain_gd, adaptive_moment };

struct TrainConfig {
  double lr = 1e-4;
  std::int64_t max_epochs = 12000;
  Optimizer optimizer = Optimizer::adaptive_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_tol = 1e-8;  // stop when gradient inf-norm falls below
  std::uint64_t seed = 0;
  std::int64_t log_every = 100;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
    if (!(grad_tol >= 0.0)) throw std::invalid_argument("grad_tol must be >= 0");
  }
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  NCReport nc;
  double accuracy = 0.0;
};

struct TrainTrajectory {
  std::vector<EpochRecord> records;
  ModelParams final_params;
  std::int64_t epochs_run = 0;
  bool hit_tolerance = false;
  double final_objective = 0.0;
};

/// Seeded uniform initialization: W_j entries in (-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// H entries in (-1/sqrt(d0), 1/sqrt(d0)), b = 0.
inline ModelParams init_params(const Dims& dims, const ImbalanceSpec& spec, std::uint64_t seed,
                               BiasMode mode) {
  dims.validate();
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const Index n_tot = static_cast<Index>(spec.total_samples);
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&rng](Matrix& m, double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  };
  ModelParams p;
  const int num_layers = dims.layers();
  for (int j = 0; j < num_layers; ++j) {
    const Index rows = (j + 1 < num_layers) ? dims.widths[static_cast<std::size_t>(j) + 1] : k_cls;
    const Index cols = dims.widths[static_cast<std::size_t>(j)];
    Matrix w(rows, cols);
    fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(cols)));
    p.weights.push_back(std::move(w));
  }
  p.h.resize(dims.d0(), n_tot);
  fill_uniform(p.h, 1.0 / std::sqrt(static_cast<double>(dims.d0())));
  if (mode == BiasMode::bias) p.b = Vector::Zero(k_cls);
  return p;
}

namespace detail {

/// Analytic reference for metric computation, when one exists for the mode:
/// biased (any L) and bias-free single-layer. Bias-free multi-layer runs have
/// no closed-form reference; their NC2/NC3 are reported degenerate.
inline std::optional<AnalyticSolution> metric_reference(const ImbalanceSpec& spec, const RegParams& reg,
                                                        const Dims& dims, BiasMode mode) {
  if (mode == BiasMode::bias) return solve_deep(spec, reg, dims);
  if (reg.layers() == 1) return solve_biasfree_ufm(spec, reg, dims.d0());
  return std::nullopt;
}

inline EpochRecord log_epoch(std::int64_t epoch, double f, double gnorm, const ModelParams& p,
                             const LabelAlgebra& la, const std::optional<AnalyticSolution>& ref) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.objective = f;
  rec.grad_norm = gnorm;
  if (ref) {
    rec.nc = nc_report(p, la, *ref);
  } else {
    rec.nc.nc1 = nc1(p.h, la.spec, &rec.nc.nc1_degenerate);
    rec.nc.nc2_degenerate = true;
    rec.nc.nc3_degenerate = true;
  }
  rec.accuracy = predict_accuracy(p, la);
  return rec;
}

}  // namespace detail

/// Full-batch training until grad_tol or max_epochs. Deterministic per config.
/// h_init (optional) seeds the features instead of the random initialization.
/// Throws "diverged; reduce lr" when the objective exceeds 1e6x its initial
/// value or turns non-finite.
inline TrainTrajectory train(const TrainConfig& cfg, const ImbalanceSpec& spec, const RegParams& reg,
                             const Dims& dims, BiasMode mode, const Matrix* h_init = nullptr) {
  cfg.validate();
  reg.validate();
  dims.validate();
  if (reg.layers() != dims.layers())
    throw std::invalid_argument("dims and lambda list disagree on layer count");

  const LabelAlgebra la = label_algebra(spec);
  const std::optional<AnalyticSolution> ref = detail::metric_reference(spec, reg, dims, mode);

  ModelParams p = init_params(dims, spec, cfg.seed, mode);
  if (h_init) {
    if (h_init->rows() != p.h.rows() || h_init->cols() != p.h.cols())
      throw std::invalid_argument("feature initialization has wrong shape");
    p.h = *h_init;
  }

  // Adaptive-moment state, laid out per parameter block.
  std::vector<Matrix> m_w, v_w;
  Matrix m_h, v_h;
  Vector m_b, v_b;
  if (cfg.optimizer == Optimizer::adaptive_moment) {
    for (const Matrix& w : p.weights) {
      m_w.push_back(Matrix::Zero(w.rows(), w.cols()));
      v_w.push_back(Matrix::Zero(w.rows(), w.cols()));
    }
    m_h = Matrix::Zero(p.h.rows(), p.h.cols());
    v_h = Matrix::Zero(p.h.rows(), p.h.cols());
    if (p.has_bias()) {
      m_b = Vector::Zero(p.b.size());
      v_b = Vector::Zero(p.b.size());
    }
  }

  const auto adam_step = [&cfg](auto& x, const auto& g, auto& m, auto& v, double bc1, double bc2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    x -= (cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon)).matrix();
  };

  TrainTrajectory out;
  double f_initial = 0.0;
  for (std::int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double f = objective(p, la, reg);
    const Gradients g = gradients(p, la, reg);
    const double gnorm = grad_inf_norm(g);
    if (epoch == 1) f_initial = f;
    if (!std::isfinite(f) || !std::isfinite(gnorm) || f > 1e6 * std::max(f_initial, 1e-300))
      throw std::runtime_error("diverged; reduce lr");

    const bool stopping = gnorm <= cfg.grad_tol || epoch == cfg.max_epochs;
    if (epoch == 1 || epoch % cfg.log_every == 0 || stopping)
      out.records.push_back(detail::log_epoch(epoch, f, gnorm, p, la, ref));
    out.epochs_run = epoch;
    out.final_objective = f;
    if (stopping) {
      out.hit_tolerance = gnorm <= cfg.grad_tol;
      break;
    }

    if (cfg.optimizer == Optimizer::plain_gd) {
      for (std::size_t j = 0; j < p.weights.size(); ++j) p.weights[j] -= cfg.lr * g.weights[j];
      p.h -= cfg.lr * g.h;
      if (p.has_bias()) p.b -= cfg.lr * g.b;
    } else {
      const double t = static_cast<double>(epoch);
      const double bc1 = 1.0 - std::pow(cfg.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t j = 0; j < p.weights.size(); ++j)
        adam_step(p.weights[j], g.weights[j], m_w[j], v_w[j], bc1, bc2);
      adam_step(p.h, g.h, m_h, v_h, bc1, bc2);
      if (p.has_bias()) adam_step(p.b, g.b, m_b, v_b, bc1, bc2);
    }
  }
  out.final_params = std::move(p);
  return out;
}

/// Writes the logged trajectory as CSV with header
/// epoch,objective,grad_norm,nc1,nc2w,nc2h,nc2wh,nc3,accuracy.
inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.precision(17);
  out << "epoch,objective,grad_norm,nc1,nc2w,nc2h,nc2wh,nc3,accuracy\n";
  for (const EpochRecord& r : records) {
    out << r.epoch << ',' << r.objective << ',' << r.grad_norm << ',' << r.nc.nc1 << ',' << r.nc.nc2w
        << ',' << r.nc.nc2h << ',' << r.nc.nc2wh << ',' << r.nc.nc3 << ',' << r.accuracy << '\n';
  }
}

}  // namespace eufm
