#pragma once

// Collapse metrics: NC1 (within/between-class variability), the NC2 suite
// (trained products vs predicted products, normalized), and NC3 (classifier /
// feature alignment), in both the biased (conjugated by Û, V̂) and bias-free
// (plain) forms. Degenerate cases produce flags, never NaNs.

#include "eufm/analytic.hpp"
#include "eufm/imbalance.hpp"
#include "eufm/linalg.hpp"
#include "eufm/model.hpp"

#include <cmath>
#include <vector>

namespace eufm {

/// One evaluation of the metric suite. Values are >= 0 and finite; a flagged
/// metric is reported as 0 with its flag set.
struct NCReport {
  double nc1 = 0.0;
  double nc2w = 0.0;
  double nc2h = 0.0;
  double nc2wh = 0.0;
  double nc3 = 0.0;
  bool nc1_degenerate = false;        // between-class covariance ~ 0
  bool nc2_degenerate = false;        // a normalization denominator ~ 0
  bool nc3_degenerate = false;        // no active column pairs to compare
  bool nc3_inconsistent = false;      // a column vanished on one side only
  std::vector<Index> nc3_skipped;     // theory-inactive columns excluded
};

/// Class means, global mean, and the within/between-class covariances.
struct ClassStats {
  Matrix class_means;  // d0 x K
  Vector global_mean;  // d0
  Matrix sigma_w;      // (1/N) sum_k sum_i (h - mean_k)(h - mean_k)^T
  Matrix sigma_b;      // (1/K) sum_k (mean_k - global)(mean_k - global)^T
};

inline ClassStats class_stats(const Matrix& h, const ImbalanceSpec& spec) {
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const Index n_tot = static_cast<Index>(spec.total_samples);
  if (h.cols() != n_tot) throw std::invalid_argument("feature column count != total samples");
  ClassStats st;
  st.class_means.resize(h.rows(), k_cls);
  Index off = 0;
  for (Index k = 0; k < k_cls; ++k) {
    const Index nk = static_cast<Index>(spec.counts[static_cast<std::size_t>(k)]);
    st.class_means.col(k) = h.middleCols(off, nk).rowwise().mean();
    off += nk;
  }
  st.global_mean = h.rowwise().mean();
  st.sigma_w = Matrix::Zero(h.rows(), h.rows());
  off = 0;
  for (Index k = 0; k < k_cls; ++k) {
    const Index nk = static_cast<Index>(spec.counts[static_cast<std::size_t>(k)]);
    const Matrix centered = h.middleCols(off, nk).colwise() - st.class_means.col(k);
    st.sigma_w += centered * centered.transpose();
    off += nk;
  }
  st.sigma_w /= static_cast<double>(n_tot);
  const Matrix dev = st.class_means.colwise() - st.global_mean;
  st.sigma_b = dev * dev.transpose() / static_cast<double>(k_cls);
  return st;
}

/// NC1 = (1/K) tr(Sigma_W pinv(Sigma_B)). Flagged degenerate (returned as 0)
/// when ||Sigma_B||_F <= 1e-12.
inline double nc1(const Matrix& h, const ImbalanceSpec& spec, bool* degenerate = nullptr) {
  const ClassStats st = class_stats(h, spec);
  if (st.sigma_b.norm() <= 1e-12) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  return (st.sigma_w * pinv(st.sigma_b)).trace() / static_cast<double>(spec.num_classes());
}

namespace detail {

/// || a/||a|| - b/||b|| ||_F, or flag when either norm is ~ 0.
inline double normalized_deviation(const Matrix& a, const Matrix& b, bool* degenerate) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 1e-12 || nb <= 1e-12) {
    *degenerate = true;
    return 0.0;
  }
  return (a / na - b / nb).norm();
}

/// Column-normalized alignment of paired column stacks, skipping the columns
/// the theory predicts inactive (sigma_star = 0).
inline double column_alignment(const Matrix& w_cols, const Matrix& g_cols, const Vector& sigma_star,
                               NCReport& report) {
  double sum_sq = 0.0;
  Index active = 0;
  for (Index i = 0; i < w_cols.cols(); ++i) {
    if (sigma_star(i) <= 0.0) {
      report.nc3_skipped.push_back(i);
      continue;
    }
    const double nw = w_cols.col(i).norm();
    const double ng = g_cols.col(i).norm();
    const bool w_zero = nw <= 1e-12;
    const bool g_zero = ng <= 1e-12;
    if (w_zero || g_zero) {
      // Theory predicts an active pair; a vanished side is an inconsistency.
      report.nc3_inconsistent = true;
      continue;
    }
    sum_sq += (w_cols.col(i) / nw - g_cols.col(i) / ng).squaredNorm();
    ++active;
  }
  if (active == 0) {
    report.nc3_degenerate = true;
    return 0.0;
  }
  return std::sqrt(sum_sq);
}

}  // namespace detail

/// Biased-mode NC2 deviations: trained products conjugated into the (Û, V̂)
/// frame vs the predicted products, each side Frobenius-normalized.
///   nc2w   Û^T A A^T Û        vs  product_ww   (A = W_L..W_1)
///   nc2h   (H̄ D V̂)^T H̄ D V̂  vs  product_hh
///   nc2wh  Û^T A H̄ D V̂       vs  product_wh
inline void nc2_suite(const ModelParams& p, const LabelAlgebra& la, const AnalyticSolution& sol,
                      NCReport& report) {
  const Matrix a = p.product();
  const Matrix h_bar = class_stats(p.h, la.spec).class_means;
  const Matrix g = h_bar * la.d * la.svd.v;  // H̄ D V̂

  bool degen = false;
  const Matrix ww = la.svd.u.transpose() * a * a.transpose() * la.svd.u;
  report.nc2w = detail::normalized_deviation(ww, sol.product_ww, &degen);
  const Matrix hh = g.transpose() * g;
  bool degen_h = false;
  report.nc2h = detail::normalized_deviation(hh, sol.product_hh, &degen_h);
  const Matrix wh = la.svd.u.transpose() * a * g;
  bool degen_wh = false;
  report.nc2wh = detail::normalized_deviation(wh, sol.product_wh, &degen_wh);
  report.nc2_degenerate = degen || degen_h || degen_wh;
}

/// Biased-mode NC3: rows of Û^T A against columns of H̄ D V̂, column-normalized,
/// restricted to theory-active directions.
inline double nc3(const ModelParams& p, const LabelAlgebra& la, const AnalyticSolution& sol,
                  NCReport& report) {
  const Matrix a = p.product();
  const Matrix h_bar = class_stats(p.h, la.spec).class_means;
  const Matrix w_rows = la.svd.u.transpose() * a;       // rows w_i^T
  const Matrix g_cols = h_bar * la.d * la.svd.v;        // columns g_i
  report.nc3 = detail::column_alignment(w_rows.transpose(), g_cols, sol.sigma_star, report);
  return report.nc3;
}

/// Bias-free variants (no conjugation): A A^T, H̄^T H̄, and A H̄ against their
/// predicted products; NC3 aligns classifier rows with class-mean features.
inline NCReport nc_biasfree_suite(const ModelParams& p, const ImbalanceSpec& spec,
                                  const AnalyticSolution& sol) {
  NCReport report;
  report.nc1 = nc1(p.h, spec, &report.nc1_degenerate);
  const Matrix a = p.product();
  const Matrix h_bar = class_stats(p.h, spec).class_means;

  bool d1 = false, d2 = false, d3 = false;
  report.nc2w = detail::normalized_deviation(a * a.transpose(), sol.product_ww, &d1);
  report.nc2h = detail::normalized_deviation(h_bar.transpose() * h_bar, sol.product_hh, &d2);
  report.nc2wh = detail::normalized_deviation(a * h_bar, sol.product_wh, &d3);
  report.nc2_degenerate = d1 || d2 || d3;
  report.nc3 = detail::column_alignment(a.transpose(), h_bar, sol.sigma_star, report);
  return report;
}

/// Full metric report; dispatches on the solution's mode.
inline NCReport nc_report(const ModelParams& p, const LabelAlgebra& la, const AnalyticSolution& sol) {
  if (sol.mode == SolveMode::biasfree_ufm) return nc_biasfree_suite(p, la.spec, sol);
  NCReport report;
  report.nc1 = nc1(p.h, la.spec, &report.nc1_degenerate);
  nc2_suite(p, la, sol, report);
  nc3(p, la, sol, report);
  return report;
}

}  // namespace eufm
