#pragma once

// Imbalanced dataset specification and the label algebra built from it:
// class counts n, totals N/K, the (N_i, l_i) group structure, D = diag(sqrt n),
// the one-hot label matrix Y, the centered targets, and their SVD.

#include "eufm/linalg.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace eufm {

/// One group of classes sharing a sample count: l_i classes with N_i samples each.
struct ImbalanceGroup {
  std::int64_t samples_per_class = 0;  // N_i
  std::int64_t class_count = 0;        // l_i
};

/// Class counts n = [n_1..n_K] plus derived totals and the group structure
/// (distinct counts sorted strictly decreasing). Immutable after construction.
struct ImbalanceSpec {
  std::vector<std::int64_t> counts;    // as given, any order
  std::int64_t total_samples = 0;      // N
  std::vector<ImbalanceGroup> groups;  // N_1 > N_2 > ... > N_m

  std::int64_t num_classes() const { return static_cast<std::int64_t>(counts.size()); }
  std::int64_t num_groups() const { return static_cast<std::int64_t>(groups.size()); }
  bool balanced() const { return groups.size() == 1; }
};

/// Validates counts (all >= 1, at least two classes) and derives the group
/// structure by sorting distinct counts descending.
inline ImbalanceSpec spec_from_counts(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) throw std::invalid_argument("need at least two classes");
  ImbalanceSpec spec;
  spec.counts.assign(counts.begin(), counts.end());
  std::map<std::int64_t, std::int64_t, std::greater<>> hist;
  for (std::int64_t n : counts) {
    if (n < 1) throw std::invalid_argument("empty class");
    ++hist[n];
    spec.total_samples += n;
  }
  for (auto [n_i, l_i] : hist) spec.groups.push_back({n_i, l_i});
  return spec;
}

inline ImbalanceSpec spec_from_counts(const std::vector<std::int64_t>& counts) {
  return spec_from_counts(std::span<const std::int64_t>(counts));
}

/// Column range of class k in class-major layout: [offset, offset + n_k).
inline Index class_offset(const ImbalanceSpec& spec, Index k) {
  Index off = 0;
  for (Index j = 0; j < k; ++j) off += static_cast<Index>(spec.counts[static_cast<std::size_t>(j)]);
  return off;
}

/// The label-side algebra shared by every solver and metric:
///   y       K x N one-hot labels, class-major column order
///   d       diag(sqrt(n_1)..sqrt(n_K))
///   y_tilde I_K - (1/N) n 1^T  (centered class targets)
///   y_hat   y_tilde * d, with svd = svd_desc(y_hat)
/// 1^T y_tilde = 0, so the smallest singular value of y_hat is exactly 0.
struct LabelAlgebra {
  ImbalanceSpec spec;
  Matrix y;
  Matrix d;
  Matrix y_tilde;
  Matrix y_hat;
  SvdFactors svd;

  /// kappa_k = k-th singular value of y_hat (descending).
  double kappa(Index k) const { return svd.s(k); }
};

inline LabelAlgebra label_algebra(const ImbalanceSpec& spec) {
  const Index k_cls = static_cast<Index>(spec.num_classes());
  const Index n_tot = static_cast<Index>(spec.total_samples);
  LabelAlgebra la;
  la.spec = spec;
  la.y = Matrix::Zero(k_cls, n_tot);
  Index col = 0;
  for (Index k = 0; k < k_cls; ++k)
    for (std::int64_t j = 0; j < spec.counts[static_cast<std::size_t>(k)]; ++j) la.y(k, col++) = 1.0;
  Vector n_vec(k_cls);
  for (Index k = 0; k < k_cls; ++k) n_vec(k) = static_cast<double>(spec.counts[static_cast<std::size_t>(k)]);
  la.d = n_vec.array().sqrt().matrix().asDiagonal();
  la.y_tilde = Matrix::Identity(k_cls, k_cls) -
               (n_vec * Matrix::Ones(1, k_cls)) / static_cast<double>(n_tot);
  la.y_hat = la.y_tilde * la.d;
  la.svd = svd_desc(la.y_hat);
  return la;
}

/// Expands per-class mean columns (d0 x K) to the full feature layout
/// (d0 x N) by copying column k into class k's n_k sample slots.
inline Matrix replicate_class_columns(const Matrix& h_bar, const ImbalanceSpec& spec) {
  if (h_bar.cols() != static_cast<Index>(spec.num_classes()))
    throw std::invalid_argument("class-mean matrix must have K columns");
  Matrix h(h_bar.rows(), static_cast<Index>(spec.total_samples));
  Index col = 0;
  for (Index k = 0; k < h_bar.cols(); ++k)
    for (std::int64_t i = 0; i < spec.counts[static_cast<std::size_t>(k)]; ++i) h.col(col++) = h_bar.col(k);
  return h;
}

/// Optimal bias n/N; entries sum to 1.
inline Vector target_bias(const ImbalanceSpec& spec) {
  const Index k_cls = static_cast<Index>(spec.num_classes());
  Vector b(k_cls);
  for (Index k = 0; k < k_cls; ++k)
    b(k) = static_cast<double>(spec.counts[static_cast<std::size_t>(k)]) /
           static_cast<double>(spec.total_samples);
  return b;
}

}  // namespace eufm
