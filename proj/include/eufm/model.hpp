#pragma once

// The L-layer extended model: parameters (W_L..W_1, H, optional bias b), the
// regularized MSE objective, exact analytic gradients, finite-difference
// verification, prediction accuracy, and params-directory import/export.

#include "eufm/imbalance.hpp"
#include "eufm/kvfile.hpp"
#include "eufm/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eufm {

enum class BiasMode { bias, bias_free };

/// Regularization: one lambda per weight layer (W_1..W_L order) plus the
/// feature penalty lambda_h. The bias is never regularized (rho_b = 0).
struct RegParams {
  std::vector<double> lambda_w;
  double lambda_h = 0.0;

  int layers() const { return static_cast<int>(lambda_w.size()); }
  void validate() const {
    if (lambda_w.empty()) throw std::invalid_argument("need at least one weight lambda");
    for (double l : lambda_w)
      if (!(l > 0.0)) throw std::invalid_argument("weight lambda must be positive");
    if (!(lambda_h > 0.0)) throw std::invalid_argument("feature lambda must be positive");
  }
};

/// Layer widths [d_0, d_1, ..., d_{L-1}]; the output dimension is K.
struct Dims {
  std::vector<Index> widths;

  int layers() const { return static_cast<int>(widths.size()); }
  Index d0() const { return widths.front(); }
  /// r = min(K, d_{L-1}, ..., d_0): the representable rank.
  Index min_rank(Index k_cls) const {
    Index r = k_cls;
    for (Index w : widths) r = std::min(r, w);
    return r;
  }
  void validate() const {
    if (widths.empty()) throw std::invalid_argument("need at least one layer width");
    for (Index w : widths)
      if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
  }
};

/// Free variables of the model. weights[j] is W_{j+1} with shape d_{j+1} x d_j
/// (the last has K rows); h is d_0 x N; b has K entries or is empty
/// (bias-free mode).
struct ModelParams {
  std::vector<Matrix> weights;
  Matrix h;
  Vector b;

  int layers() const { return static_cast<int>(weights.size()); }
  bool has_bias() const { return b.size() > 0; }

  /// W_L * ... * W_1 (the end-to-end linear map, K x d_0).
  Matrix product() const {
    Matrix a = weights.front();
    for (std::size_t j = 1; j < weights.size(); ++j) a = weights[j] * a;
    return a;
  }
};

/// Gradient of the objective; mirrors ModelParams shapes.
struct Gradients {
  std::vector<Matrix> weights;
  Matrix h;
  Vector b;
};

namespace detail {

inline void check_shapes(const ModelParams& p, const LabelAlgebra& la, const RegParams& reg) {
  const Index k_cls = static_cast<Index>(la.spec.num_classes());
  const Index n_tot = static_cast<Index>(la.spec.total_samples);
  if (p.weights.empty()) throw std::invalid_argument("model has no weight layers");
  if (static_cast<int>(reg.lambda_w.size()) != p.layers())
    throw std::invalid_argument("lambda count does not match layer count");
  if (p.h.cols() != n_tot) throw std::invalid_argument("feature column count != total samples");
  if (p.weights.front().cols() != p.h.rows())
    throw std::invalid_argument("first layer width does not match feature dimension");
  for (std::size_t j = 1; j < p.weights.size(); ++j)
    if (p.weights[j].cols() != p.weights[j - 1].rows())
      throw std::invalid_argument("weight shape chain broken");
  if (p.weights.back().rows() != k_cls)
    throw std::invalid_argument("last layer rows != class count");
  if (p.has_bias() && p.b.size() != k_cls)
    throw std::invalid_argument("bias length != class count");
  for (const Matrix& w : p.weights) require_finite(w, "weights");
  require_finite(p.h, "features");
  if (p.has_bias() && !p.b.allFinite()) throw std::invalid_argument("non-finite bias");
}

/// Residual W_L...W_1 H + b 1^T - Y.
inline Matrix residual(const ModelParams& p, const LabelAlgebra& la) {
  Matrix r = p.product() * p.h - la.y;
  if (p.has_bias()) r.colwise() += p.b;
  return r;
}

}  // namespace detail

/// (1/2N) ||W_L...W_1 H + b 1^T - Y||_F^2 + sum_j (lambda_j/2)||W_j||_F^2
/// + (lambda_h/2)||H||_F^2.
inline double objective(const ModelParams& p, const LabelAlgebra& la, const RegParams& reg) {
  detail::check_shapes(p, la, reg);
  const double n_tot = static_cast<double>(la.spec.total_samples);
  double f = detail::residual(p, la).squaredNorm() / (2.0 * n_tot);
  for (int j = 0; j < p.layers(); ++j)
    f += 0.5 * reg.lambda_w[static_cast<std::size_t>(j)] * p.weights[static_cast<std::size_t>(j)].squaredNorm();
  f += 0.5 * reg.lambda_h * p.h.squaredNorm();
  return f;
}

/// The objective with every within-class feature replaced by its class mean
/// (the class-mean lower bound; equals objective() iff features are collapsed).
inline double objective_class_mean(const ModelParams& p, const LabelAlgebra& la, const RegParams& reg) {
  detail::check_shapes(p, la, reg);
  const Index k_cls = static_cast<Index>(la.spec.num_classes());
  Matrix h_bar(p.h.rows(), k_cls);
  for (Index k = 0; k < k_cls; ++k) {
    const Index off = class_offset(la.spec, k);
    const Index nk = static_cast<Index>(la.spec.counts[static_cast<std::size_t>(k)]);
    h_bar.col(k) = p.h.middleCols(off, nk).rowwise().mean();
  }
  const double n_tot = static_cast<double>(la.spec.total_samples);
  Matrix r = p.product() * h_bar - Matrix::Identity(k_cls, k_cls);
  if (p.has_bias()) r.colwise() += p.b;
  double f = (r * la.d).squaredNorm() / (2.0 * n_tot);
  for (int j = 0; j < p.layers(); ++j)
    f += 0.5 * reg.lambda_w[static_cast<std::size_t>(j)] * p.weights[static_cast<std::size_t>(j)].squaredNorm();
  f += 0.5 * reg.lambda_h * (h_bar * la.d).squaredNorm();
  return f;
}

/// Exact analytic gradients of objective().
inline Gradients gradients(const ModelParams& p, const LabelAlgebra& la, const RegParams& reg) {
  detail::check_shapes(p, la, reg);
  const double n_tot = static_cast<double>(la.spec.total_samples);
  const int num_layers = p.layers();

  // Forward prefixes: acts[j] = W_j ... W_1 H  (acts[0] = H).
  std::vector<Matrix> acts(static_cast<std::size_t>(num_layers) + 1);
  acts[0] = p.h;
  for (int j = 0; j < num_layers; ++j)
    acts[static_cast<std::size_t>(j) + 1] = p.weights[static_cast<std::size_t>(j)] * acts[static_cast<std::size_t>(j)];

  Matrix r = acts.back() - la.y;
  if (p.has_bias()) r.colwise() += p.b;

  Gradients g;
  g.weights.resize(static_cast<std::size_t>(num_layers));
  // Backward suffixes: back = W_{j+1}^T ... W_L^T R, starting with R itself.
  Matrix back = r / n_tot;
  for (int j = num_layers - 1; j >= 0; --j) {
    g.weights[static_cast<std::size_t>(j)] =
        back * acts[static_cast<std::size_t>(j)].transpose() +
        reg.lambda_w[static_cast<std::size_t>(j)] * p.weights[static_cast<std::size_t>(j)];
    back = p.weights[static_cast<std::size_t>(j)].transpose() * back;
  }
  g.h = back + reg.lambda_h * p.h;
  if (p.has_bias()) g.b = r.rowwise().sum() / n_tot;
  return g;
}

/// Infinity norm across all gradient blocks.
inline double grad_inf_norm(const Gradients& g) {
  double m = 0.0;
  for (const Matrix& w : g.weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  m = std::max(m, g.h.cwiseAbs().maxCoeff());
  if (g.b.size() > 0) m = std::max(m, g.b.cwiseAbs().maxCoeff());
  return m;
}

/// Finite-difference comparison over a random coordinate sample.
struct FdCheck {
  double max_rel = 0.0;  // max |analytic - central diff| / (|analytic| + 1e-12)
  double max_abs = 0.0;  // max |analytic - central diff|
};

/// Central-difference check of gradients() on `samples` random coordinates
/// (seeded, reproducible). Coordinates span all blocks: weights, H, bias.
inline FdCheck fd_check(const ModelParams& p, const LabelAlgebra& la, const RegParams& reg,
                        double step, int samples = 100, std::uint64_t seed = 0) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_check: step must be > 0");
  const Gradients g = gradients(p, la, reg);

  // Flat coordinate space: per-layer weights, then H, then b.
  std::vector<Index> block_sizes;
  for (const Matrix& w : p.weights) block_sizes.push_back(w.size());
  block_sizes.push_back(p.h.size());
  if (p.has_bias()) block_sizes.push_back(p.b.size());
  Index total = 0;
  for (Index s : block_sizes) total += s;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, total - 1);
  ModelParams probe = p;

  auto coord = [&](ModelParams& q, Index flat) -> double* {
    for (std::size_t j = 0; j < q.weights.size(); ++j) {
      if (flat < q.weights[j].size()) return q.weights[j].data() + flat;
      flat -= q.weights[j].size();
    }
    if (flat < q.h.size()) return q.h.data() + flat;
    flat -= q.h.size();
    return q.b.data() + flat;
  };

  FdCheck out;
  for (int s = 0; s < samples; ++s) {
    const Index flat = pick(rng);
    double* x = coord(probe, flat);
    const double saved = *x;
    *x = saved + step;
    const double f_plus = objective(probe, la, reg);
    *x = saved - step;
    const double f_minus = objective(probe, la, reg);
    *x = saved;
    const double fd = (f_plus - f_minus) / (2.0 * step);
    // Resolve the analytic gradient entry through the same flat indexing.
    Index rem = flat;
    double a = 0.0;
    bool found = false;
    for (std::size_t j = 0; j < g.weights.size() && !found; ++j) {
      if (rem < g.weights[j].size()) {
        a = *(g.weights[j].data() + rem);
        found = true;
      } else {
        rem -= g.weights[j].size();
      }
    }
    if (!found) {
      if (rem < g.h.size()) {
        a = *(g.h.data() + rem);
      } else {
        a = g.b(rem - g.h.size());
      }
    }
    const double diff = std::abs(a - fd);
    out.max_abs = std::max(out.max_abs, diff);
    out.max_rel = std::max(out.max_rel, diff / (std::abs(a) + 1e-12));
  }
  return out;
}

/// Fraction of samples whose argmax logit (ties -> lowest class index) matches
/// the true class.
inline double predict_accuracy(const ModelParams& p, const LabelAlgebra& la) {
  Matrix logits = p.product() * p.h;
  if (p.has_bias()) logits.colwise() += p.b;
  const Index k_cls = static_cast<Index>(la.spec.num_classes());
  Index correct = 0, col = 0;
  for (Index k = 0; k < k_cls; ++k) {
    for (std::int64_t i = 0; i < la.spec.counts[static_cast<std::size_t>(k)]; ++i, ++col) {
      Index best = 0;
      for (Index row = 1; row < k_cls; ++row)
        if (logits(row, col) > logits(best, col)) best = row;
      if (best == k) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(la.spec.total_samples);
}

// ---------------------------------------------------------------------------
// Params directory: manifest + one CSV per matrix.
// ---------------------------------------------------------------------------

/// Manifest contents for a saved params directory. Beyond shapes and the layer
/// count, it records the training context (counts, lambdas) when available so
/// metric reports can be recomputed from the directory alone.
struct ParamsManifest {
  int layers = 0;
  bool has_bias = false;
  std::vector<std::pair<Index, Index>> w_shapes;
  std::pair<Index, Index> h_shape{0, 0};
  std::optional<std::vector<std::int64_t>> counts;
  std::optional<std::vector<double>> lambda_w;
  std::optional<double> lambda_h;
};

/// Writes params (and optional spec/reg context) into dir: manifest.txt,
/// w1.csv..wL.csv, h.csv, b.csv (bias mode only).
inline void save_params(const std::filesystem::path& dir, const ModelParams& p,
                        const ImbalanceSpec* spec = nullptr, const RegParams* reg = nullptr) {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
  m << "layers = " << p.layers() << "\n";
  m << "mode = " << (p.has_bias() ? "bias" : "bias-free") << "\n";
  for (int j = 0; j < p.layers(); ++j) {
    const Matrix& w = p.weights[static_cast<std::size_t>(j)];
    m << "w" << (j + 1) << "_shape = [" << w.rows() << ", " << w.cols() << "]\n";
  }
  m << "h_shape = [" << p.h.rows() << ", " << p.h.cols() << "]\n";
  if (spec) {
    m << "counts = [";
    for (std::size_t i = 0; i < spec->counts.size(); ++i) m << (i ? ", " : "") << spec->counts[i];
    m << "]\n";
  }
  if (reg) {
    m << "lambda_w = [";
    for (std::size_t i = 0; i < reg->lambda_w.size(); ++i) m << (i ? ", " : "") << std::setprecision(17) << reg->lambda_w[i];
    m << "]\n";
    m << "lambda_h = " << std::setprecision(17) << reg->lambda_h << "\n";
  }
  for (int j = 0; j < p.layers(); ++j)
    write_matrix_csv(dir / ("w" + std::to_string(j + 1) + ".csv"), p.weights[static_cast<std::size_t>(j)]);
  write_matrix_csv(dir / "h.csv", p.h);
  if (p.has_bias()) write_matrix_csv(dir / "b.csv", p.b);
}

inline ParamsManifest load_manifest(const std::filesystem::path& dir) {
  const KvFile kv = KvFile::parse_file(dir / "manifest.txt");
  ParamsManifest man;
  man.layers = static_cast<int>(kv.get_i64("layers"));
  if (man.layers < 1) throw std::runtime_error("manifest: layers must be >= 1");
  const std::string mode = kv.get_str("mode");
  if (mode != "bias" && mode != "bias-free")
    throw std::runtime_error("manifest: mode must be `bias` or `bias-free`");
  man.has_bias = (mode == "bias");
  for (int j = 1; j <= man.layers; ++j) {
    auto shape = kv.get_i64_list("w" + std::to_string(j) + "_shape");
    if (shape.size() != 2) throw std::runtime_error("manifest: bad weight shape");
    man.w_shapes.emplace_back(static_cast<Index>(shape[0]), static_cast<Index>(shape[1]));
  }
  auto hs = kv.get_i64_list("h_shape");
  if (hs.size() != 2) throw std::runtime_error("manifest: bad h_shape");
  man.h_shape = {static_cast<Index>(hs[0]), static_cast<Index>(hs[1])};
  if (kv.has("counts")) man.counts = kv.get_i64_list("counts");
  if (kv.has("lambda_w")) man.lambda_w = kv.get_f64_list("lambda_w");
  if (kv.has("lambda_h")) man.lambda_h = kv.get_f64("lambda_h");
  return man;
}

/// Loads a params directory written by save_params; shapes are validated
/// against the manifest.
inline ModelParams load_params(const std::filesystem::path& dir) {
  const ParamsManifest man = load_manifest(dir);
  ModelParams p;
  for (int j = 1; j <= man.layers; ++j) {
    Matrix w = read_matrix_csv(dir / ("w" + std::to_string(j) + ".csv"));
    const auto& want = man.w_shapes[static_cast<std::size_t>(j - 1)];
    if (w.rows() != want.first || w.cols() != want.second)
      throw std::runtime_error("params: w" + std::to_string(j) + " shape does not match manifest");
    p.weights.push_back(std::move(w));
  }
  p.h = read_matrix_csv(dir / "h.csv");
  if (p.h.rows() != man.h_shape.first || p.h.cols() != man.h_shape.second)
    throw std::runtime_error("params: h shape does not match manifest");
  if (man.has_bias) {
    Matrix b = read_matrix_csv(dir / "b.csv");
    if (b.cols() != 1) throw std::runtime_error("params: b must be a column vector");
    p.b = b.col(0);
  }
  return p;
}

}  // namespace eufm
