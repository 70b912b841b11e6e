#pragma once

// Closed-form global minimizers of the regularized linear model: the bias-free
// and biased single-layer cases, the deep (L >= 2) case via the scalar root
// problem, nuclear-norm factorization, and canonical reconstruction of explicit
// parameter matrices from identity-embedding orthonormal factors.

#include "eufm/imbalance.hpp"
#include "eufm/linalg.hpp"
#include "eufm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace eufm {

enum class SolveMode { biasfree_ufm, bias_ufm, deep };

/// A global minimizer in closed form.
///
/// sigma_star holds the K thresholded singular values in the solver's natural
/// parametrization: feature-side values (singulars of H̄D) for the single-layer
/// solvers, first-layer weight singulars for the deep solver. Inactive or
/// width-truncated directions are exactly 0.
///
/// The product_* matrices are the predicted invariant products at the global
/// minimum (unique across the orthogonal family of minimizers):
///   product_wh     biased: Û^T (W_L..W_1) H̄ D V̂      bias-free: W H̄
///   product_ww     biased: Û^T (W_L..W_1)(W_L..W_1)^T Û   bias-free: W W^T
///   product_hh     biased: (H̄ D V̂)^T (H̄ D V̂)          bias-free: H̄^T H̄
///   product_wlast  biased: Û^T W_L W_L^T Û             bias-free: = product_ww
/// upsilon1 = diag of squared weight-side singulars; upsilon2 the companion
/// diagonal sigma^{2L} / (c sigma^{2L} + N lambda_h)^2; both K x K.
struct AnalyticSolution {
  SolveMode mode = SolveMode::bias_ufm;
  int layers = 1;
  double c_factor = 1.0;  // lambda_{W_1}^{L-1} / (lambda_{W_2}..lambda_{W_L})
  Vector sigma_star;
  Vector b_star;  // empty in bias-free mode
  Matrix product_wh;
  Matrix product_ww;
  Matrix product_hh;
  Matrix product_wlast;
  Matrix upsilon1;
  Matrix upsilon2;
  ModelParams canonical;
  double f_star = 0.0;
  bool rank_truncated = false;
};

/// Optimal singular value of the single-layer scalar subproblem:
/// sqrt(sqrt(kappa_sq*lw/lh) - n_total*lw) when lh*lw <= kappa_sq/n_total^2,
/// else 0 (ties collapse to 0 through the same formula).
inline double sigma_star_scalar(double kappa_sq, double n_total, double lw, double lh) {
  if (kappa_sq < 0.0) throw std::invalid_argument("sigma_star_scalar: negative kappa_sq");
  if (!(n_total >= 1.0) || !(lw > 0.0) || !(lh > 0.0))
    throw std::invalid_argument("sigma_star_scalar: invalid parameters");
  if (lh * lw > kappa_sq / (n_total * n_total)) return 0.0;
  const double inner = std::sqrt(kappa_sq * lw / lh) - n_total * lw;
  return std::sqrt(std::max(inner, 0.0));
}

/// Minimizer of g(x) = 1/(x^L + 1) + alpha*x over x >= 0 (L >= 2):
/// 0 when alpha >= (L-1)^{(L-1)/L} / L (ties to 0), otherwise the largest root
/// of alpha = L x^{L-1} / (x^L + 1)^2, bracketed from the peak of the
/// right-hand side and bisected to 1e-12.
inline double gmin_scalar(double alpha, int layers) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gmin_scalar: alpha must be > 0");
  if (layers < 2) throw std::invalid_argument("gmin_scalar: L must be >= 2");
  const double l = static_cast<double>(layers);
  const double threshold = std::pow(l - 1.0, (l - 1.0) / l) / l;
  if (alpha >= threshold) return 0.0;

  const auto rhs = [l](double x) {
    const double xl = std::pow(x, l);
    return l * std::pow(x, l - 1.0) / ((xl + 1.0) * (xl + 1.0));
  };
  // rhs increases to its peak at x = ((L-1)/(L+1))^{1/L} then decays to 0; the
  // largest root therefore lies right of the peak.
  double lo = std::pow((l - 1.0) / (l + 1.0), 1.0 / l);
  double hi = std::max(2.0 * lo, 1.0);
  while (rhs(hi) >= alpha) hi *= 2.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (rhs(mid) >= alpha)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Splits z into (W, E) with W*E = z and
/// (1/2)(||W||_F^2/alpha + alpha*||E||_F^2) = ||z||_* (nuclear norm); the free
/// orthonormal factor is fixed to the identity, so W = sqrt(alpha)*U*Sigma^{1/2}
/// and E = Sigma^{1/2}*V^T/sqrt(alpha) on the full singular support.
inline std::pair<Matrix, Matrix> nuclear_factorize(const Matrix& z, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("nuclear_factorize: alpha must be > 0");
  const SvdFactors f = svd_desc(z);
  const Index r = f.s.size();
  const Vector root_s = f.s.array().sqrt().matrix();
  Matrix w = std::sqrt(alpha) * f.u.leftCols(r) * root_s.asDiagonal();
  Matrix e = (1.0 / std::sqrt(alpha)) * root_s.asDiagonal() * f.v.leftCols(r).transpose();
  return {std::move(w), std::move(e)};
}

namespace detail {

inline void require_single_layer(const RegParams& reg) {
  reg.validate();
  if (reg.layers() != 1) throw std::invalid_argument("single-layer solver needs exactly one weight lambda");
}

/// Indices of the r largest values (stable: ties keep lower index first).
inline std::vector<Index> top_indices(const Vector& values, Index r) {
  std::vector<Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });
  idx.resize(static_cast<std::size_t>(r));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Bias-free single-layer minimizer. Per-class scalar problems in the sample
/// counts n_k; predicted products are diagonal in class order. When d0 < K the
/// representable rank truncates to the d0 largest classes (rank_truncated set
/// if an active class was dropped).
inline AnalyticSolution solve_biasfree_ufm(const ImbalanceSpec& spec, const RegParams& reg, Index d0) {
  detail::require_single_layer(reg);
  if (d0 < 1) throw std::invalid_argument("d0 must be >= 1");
  const double lw = reg.lambda_w[0];
  const double lh = reg.lambda_h;
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const double n_tot = static_cast<double>(spec.total_samples);
  const Index r = std::min(d0, k_cls);

  Vector counts(k_cls);
  for (Index k = 0; k < k_cls; ++k) counts(k) = static_cast<double>(spec.counts[static_cast<std::size_t>(k)]);

  AnalyticSolution sol;
  sol.mode = SolveMode::biasfree_ufm;
  sol.layers = 1;
  sol.sigma_star = Vector::Zero(k_cls);
  const std::vector<Index> kept = detail::top_indices(counts, r);
  std::vector<bool> keep(static_cast<std::size_t>(k_cls), false);
  for (Index k : kept) keep[static_cast<std::size_t>(k)] = true;
  for (Index k = 0; k < k_cls; ++k) {
    const double s = sigma_star_scalar(counts(k), n_tot, lw, lh);
    if (keep[static_cast<std::size_t>(k)])
      sol.sigma_star(k) = s;
    else if (s > 0.0)
      sol.rank_truncated = true;
  }

  const Vector sig_sq = sol.sigma_star.array().square().matrix();
  const Vector shrink = (sig_sq.array() / (sig_sq.array() + n_tot * lw)).matrix();
  sol.product_wh = shrink.asDiagonal();
  Vector ww(k_cls);  // W W^T diagonal: n_k sigma_k^2 / (sigma_k^2 + N lw)^2
  for (Index k = 0; k < k_cls; ++k) {
    const double denom = sig_sq(k) + n_tot * lw;
    ww(k) = counts(k) * sig_sq(k) / (denom * denom);
  }
  sol.product_ww = ww.asDiagonal();
  sol.product_hh = (sig_sq.array() / counts.array()).matrix().asDiagonal();
  sol.product_wlast = sol.product_ww;
  sol.upsilon1 = sol.product_ww;
  sol.upsilon2 = sol.product_hh;

  // Canonical: class k_j occupies embedding direction j (class order among the
  // kept classes); W row k = sqrt(n_k) sigma_k/(sigma_k^2+N lw) e_j^T,
  // mean feature h̄_k = sigma_k/sqrt(n_k) e_j.
  Matrix w = Matrix::Zero(k_cls, d0);
  Matrix h_bar = Matrix::Zero(d0, k_cls);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const Index k = kept[j];
    const double denom = sig_sq(k) + n_tot * lw;
    w(k, static_cast<Index>(j)) = std::sqrt(counts(k)) * sol.sigma_star(k) / denom;
    h_bar(static_cast<Index>(j), k) = sol.sigma_star(k) / std::sqrt(counts(k));
  }
  sol.canonical.weights = {std::move(w)};
  sol.canonical.h = replicate_class_columns(h_bar, spec);

  const LabelAlgebra la = label_algebra(spec);
  sol.f_star = objective(sol.canonical, la, reg);
  return sol;
}

/// Biased single-layer minimizer. Scalar problems run over the singular values
/// kappa of y_hat (descending); b* = n/N. Predicted products are diagonal in
/// the conjugated (Û, V̂) frame. Width d0 < K truncates to the top-d0 kappa
/// directions.
inline AnalyticSolution solve_bias_ufm(const ImbalanceSpec& spec, const RegParams& reg, Index d0) {
  detail::require_single_layer(reg);
  if (d0 < 1) throw std::invalid_argument("d0 must be >= 1");
  const double lw = reg.lambda_w[0];
  const double lh = reg.lambda_h;
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const double n_tot = static_cast<double>(spec.total_samples);
  const Index r = std::min(d0, k_cls);
  const LabelAlgebra la = label_algebra(spec);
  const Vector& kappa = la.svd.s;

  AnalyticSolution sol;
  sol.mode = SolveMode::bias_ufm;
  sol.layers = 1;
  sol.sigma_star = Vector::Zero(k_cls);
  for (Index k = 0; k < k_cls; ++k) {
    const double s = sigma_star_scalar(kappa(k) * kappa(k), n_tot, lw, lh);
    if (k < r)
      sol.sigma_star(k) = s;
    else if (s > 0.0)
      sol.rank_truncated = true;
  }

  const double tau = n_tot * std::sqrt(lw * lh);
  Vector t = Vector::Zero(k_cls);
  for (Index k = 0; k < r; ++k) t(k) = std::max(kappa(k) - tau, 0.0);

  sol.product_wh = t.asDiagonal();
  sol.product_ww = (std::sqrt(lh / lw) * t).asDiagonal();
  sol.product_hh = (std::sqrt(lw / lh) * t).asDiagonal();
  sol.product_wlast = sol.product_ww;
  sol.upsilon1 = sol.product_ww;
  Vector u2(k_cls);
  for (Index k = 0; k < k_cls; ++k) {
    const double sw_sq = std::sqrt(lh / lw) * t(k);
    const double denom = sw_sq + n_tot * lh;
    u2(k) = sw_sq / (denom * denom);
  }
  sol.upsilon2 = u2.asDiagonal();

  // Canonical: W = Û kappa Sigma (Sigma^2 + N lw)^-1 R^T, H̄ = R Sigma V̂^T D^-1
  // restricted to the top-r directions, b = n/N.
  Vector gain(k_cls);
  for (Index k = 0; k < k_cls; ++k) {
    const double sig = sol.sigma_star(k);
    gain(k) = kappa(k) * sig / (sig * sig + n_tot * lw);
  }
  const Matrix embed = orthonormal_embed(r, d0);
  const Matrix u_gain = la.svd.u * gain.asDiagonal();
  Matrix w = u_gain.leftCols(r) * embed.transpose();
  const Matrix sv = sol.sigma_star.asDiagonal() * la.svd.v.transpose() *
                    la.d.diagonal().cwiseInverse().asDiagonal();
  Matrix h_bar = embed * sv.topRows(r);
  sol.canonical.weights = {std::move(w)};
  sol.canonical.h = replicate_class_columns(h_bar, spec);
  sol.canonical.b = target_bias(spec);
  sol.b_star = sol.canonical.b;
  sol.f_star = objective(sol.canonical, la, reg);
  return sol;
}

/// Deep (L >= 2) biased minimizer via the scalar root problem. sigma_star
/// holds first-layer weight singulars; canonical factors use identity
/// embeddings at every layer; b* = n/N. L = 1 delegates to solve_bias_ufm.
inline AnalyticSolution solve_deep(const ImbalanceSpec& spec, const RegParams& reg, const Dims& dims) {
  reg.validate();
  dims.validate();
  const int num_layers = reg.layers();
  if (dims.layers() != num_layers)
    throw std::invalid_argument("dims and lambda list disagree on layer count");
  if (num_layers == 1) return solve_bias_ufm(spec, reg, dims.d0());

  const double l = static_cast<double>(num_layers);
  const double lh = reg.lambda_h;
  const double l1 = reg.lambda_w.front();
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const double n_tot = static_cast<double>(spec.total_samples);
  const Index r = dims.min_rank(k_cls);
  const LabelAlgebra la = label_algebra(spec);
  const Vector& kappa = la.svd.s;

  double lambda_prod = lh;
  for (double lam : reg.lambda_w) lambda_prod *= lam;
  double c = std::pow(l1, l - 1.0);
  for (int j = 1; j < num_layers; ++j) c /= reg.lambda_w[static_cast<std::size_t>(j)];

  AnalyticSolution sol;
  sol.mode = SolveMode::deep;
  sol.layers = num_layers;
  sol.c_factor = c;
  sol.sigma_star = Vector::Zero(k_cls);
  const double root_scale = std::pow(n_tot * lh / c, 1.0 / l);
  for (Index k = 0; k < k_cls; ++k) {
    if (kappa(k) <= 0.0) continue;
    const double alpha = l * n_tot * std::pow(n_tot * lambda_prod, 1.0 / l) / (kappa(k) * kappa(k));
    const double x = gmin_scalar(alpha, num_layers);
    if (k < r)
      sol.sigma_star(k) = std::sqrt(root_scale * x);
    else if (x > 0.0)
      sol.rank_truncated = true;
  }

  Vector sig_2l(k_cls), u2(k_cls), wh(k_cls);
  for (Index k = 0; k < k_cls; ++k) {
    sig_2l(k) = std::pow(sol.sigma_star(k), 2.0 * l);
    const double denom = c * sig_2l(k) + n_tot * lh;
    u2(k) = sig_2l(k) / (denom * denom);
    wh(k) = c * sig_2l(k) / denom * kappa(k);
  }
  sol.upsilon1 = sol.sigma_star.array().square().matrix().asDiagonal();
  sol.upsilon2 = u2.asDiagonal();
  sol.product_wlast = (l1 / reg.lambda_w.back()) * sol.upsilon1;
  sol.product_ww = (c * sig_2l).asDiagonal();
  sol.product_hh = (c * u2.array() * kappa.array().square()).matrix().asDiagonal();
  sol.product_wh = wh.asDiagonal();

  // Canonical factors: per-layer singulars sqrt(l1/lj) * sigma on the shared
  // rank-r identity embeddings; the last layer rotates into Û.
  sol.canonical.weights.resize(static_cast<std::size_t>(num_layers));
  Vector sigma_r = sol.sigma_star.head(r);
  for (int j = 0; j < num_layers; ++j) {
    const double scale = std::sqrt(l1 / reg.lambda_w[static_cast<std::size_t>(j)]);
    const Vector diag_j = scale * sigma_r;
    const Matrix lhs = (j == num_layers - 1)
                           ? Matrix(la.svd.u.leftCols(r))
                           : orthonormal_embed(r, dims.widths[static_cast<std::size_t>(j) + 1]);
    const Matrix rhs = orthonormal_embed(r, dims.widths[static_cast<std::size_t>(j)]);
    sol.canonical.weights[static_cast<std::size_t>(j)] = lhs * diag_j.asDiagonal() * rhs.transpose();
  }

  Vector e_diag(r);
  for (Index k = 0; k < r; ++k) {
    const double denom = c * sig_2l(k) + n_tot * lh;
    e_diag(k) = std::sqrt(c) * std::pow(sol.sigma_star(k), l) * kappa(k) / denom;
  }
  const Matrix v1 = orthonormal_embed(r, dims.d0());
  Matrix e_bar = v1 * e_diag.asDiagonal() * la.svd.v.leftCols(r).transpose();
  Matrix h_bar = e_bar * la.d.diagonal().cwiseInverse().asDiagonal();
  sol.canonical.h = replicate_class_columns(h_bar, spec);
  sol.canonical.b = target_bias(spec);
  sol.b_star = sol.canonical.b;
  sol.f_star = objective(sol.canonical, la, reg);
  return sol;
}

/// Evaluates the model objective at the canonical minimizer (ground truth).
inline double optimal_objective(const AnalyticSolution& sol, const ImbalanceSpec& spec, const RegParams& reg) {
  const LabelAlgebra la = label_algebra(spec);
  return objective(sol.canonical, la, reg);
}

/// The closed-form optimal value as a per-direction sum; agrees with
/// optimal_objective to 1e-10 relative (asserted in tests, not here).
inline double closed_form_objective(const AnalyticSolution& sol, const ImbalanceSpec& spec, const RegParams& reg) {
  const double n_tot = static_cast<double>(spec.total_samples);
  const double lh = reg.lambda_h;
  const Index k_cls = static_cast<Index>(spec.num_classes());
  double f = 0.0;
  if (sol.mode == SolveMode::biasfree_ufm) {
    const double lw = reg.lambda_w[0];
    for (Index k = 0; k < k_cls; ++k) {
      const double nk = static_cast<double>(spec.counts[static_cast<std::size_t>(k)]);
      const double s2 = sol.sigma_star(k) * sol.sigma_star(k);
      f += nk * lw / (2.0 * (s2 + n_tot * lw)) + 0.5 * lh * s2;
    }
    return f;
  }
  const LabelAlgebra la = label_algebra(spec);
  if (sol.mode == SolveMode::bias_ufm) {
    const double lw = reg.lambda_w[0];
    for (Index k = 0; k < k_cls; ++k) {
      const double kap_sq = la.kappa(k) * la.kappa(k);
      const double s2 = sol.sigma_star(k) * sol.sigma_star(k);
      f += kap_sq * lw / (2.0 * (s2 + n_tot * lw)) + 0.5 * lh * s2;
    }
    return f;
  }
  const double l = static_cast<double>(sol.layers);
  for (Index k = 0; k < k_cls; ++k) {
    const double kap_sq = la.kappa(k) * la.kappa(k);
    const double s2 = sol.sigma_star(k) * sol.sigma_star(k);
    const double s_2l = std::pow(sol.sigma_star(k), 2.0 * l);
    f += 0.5 * (lh * kap_sq / (sol.c_factor * s_2l + n_tot * lh) + l * reg.lambda_w.front() * s2);
  }
  return f;
}

}  // namespace eufm
