#pragma once

// Singular-value theory of the centered label matrix: the reduced m x m group
// matrix G, its closed-form singular values for m in {2,3}, assembly of the
// full K-value spectrum, and the strict interlacing structure.

#include "eufm/imbalance.hpp"
#include "eufm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace eufm {

/// Where an assembled singular value comes from: a repeated sqrt(N_j) within a
/// group (multiplicity l_j - 1) or the reduced matrix G.
enum class SpectrumSource { group_repeat, g_matrix };

struct SpectrumEntry {
  double value = 0.0;
  std::int64_t multiplicity = 0;
  SpectrumSource source = SpectrumSource::g_matrix;
};

/// Reduced spectrum of y_hat: the m x m matrix G, its singular values, the
/// assembled K-value spectrum, and the (value, multiplicity, source) table.
struct GroupSpectrum {
  Matrix g;
  Vector g_singulars;     // descending, length m (last is 0)
  Vector full_singulars;  // descending, length K
  std::vector<SpectrumEntry> multiplicities;
};

/// The m x m reduced matrix: G[i][i] = sqrt(N_i)(1 - N_i*l_i/N),
/// G[i][j] = -(N_i*sqrt(N_j)/N)*sqrt(l_i*l_j) for i != j.
inline Matrix group_matrix(const ImbalanceSpec& spec) {
  const Index m = static_cast<Index>(spec.num_groups());
  const double n_tot = static_cast<double>(spec.total_samples);
  Matrix g(m, m);
  for (Index i = 0; i < m; ++i) {
    const double n_i = static_cast<double>(spec.groups[static_cast<std::size_t>(i)].samples_per_class);
    const double l_i = static_cast<double>(spec.groups[static_cast<std::size_t>(i)].class_count);
    for (Index j = 0; j < m; ++j) {
      if (i == j) {
        g(i, i) = std::sqrt(n_i) * (1.0 - n_i * l_i / n_tot);
      } else {
        const double n_j = static_cast<double>(spec.groups[static_cast<std::size_t>(j)].samples_per_class);
        const double l_j = static_cast<double>(spec.groups[static_cast<std::size_t>(j)].class_count);
        g(i, j) = -(n_i * std::sqrt(n_j) / n_tot) * std::sqrt(l_i * l_j);
      }
    }
  }
  return g;
}

/// Closed-form singular values of G for m=2 (one nonzero value sqrt(K*N1*N2/N))
/// and m=3 (square roots of the quadratic roots of l^2 - a*l + b, solved in the
/// cancellation-safe form). Other m throw.
inline Vector closed_form_g_singulars(const ImbalanceSpec& spec) {
  const std::int64_t m = spec.num_groups();
  const double k_cls = static_cast<double>(spec.num_classes());
  const double n_tot = static_cast<double>(spec.total_samples);
  if (m == 2) {
    const double n1 = static_cast<double>(spec.groups[0].samples_per_class);
    const double n2 = static_cast<double>(spec.groups[1].samples_per_class);
    Vector s(2);
    s << std::sqrt(k_cls * n1 * n2 / n_tot), 0.0;
    return s;
  }
  if (m == 3) {
    const double n1 = static_cast<double>(spec.groups[0].samples_per_class);
    const double n2 = static_cast<double>(spec.groups[1].samples_per_class);
    const double n3 = static_cast<double>(spec.groups[2].samples_per_class);
    const double l1 = static_cast<double>(spec.groups[0].class_count);
    const double l2 = static_cast<double>(spec.groups[1].class_count);
    const double l3 = static_cast<double>(spec.groups[2].class_count);
    const double a = (n1 * (n2 * l2 + n3 * l3) + n2 * (n1 * l1 + n3 * l3) + n3 * (n1 * l1 + n2 * l2)) / n_tot;
    const double b = k_cls * n1 * n2 * n3 / n_tot;
    // Stable quadratic: a > 0 always here, so q = (a + sqrt(disc))/2 avoids
    // cancellation and the small root is b/q.
    const double disc = std::max(a * a - 4.0 * b, 0.0);
    const double q = 0.5 * (a + std::sqrt(disc));
    Vector s(3);
    s << std::sqrt(q), std::sqrt(b / q), 0.0;
    return s;
  }
  throw std::invalid_argument("closed form unavailable; use group_matrix + svd");
}

/// Full spectrum of y_hat assembled from the group structure: sqrt(N_j) with
/// multiplicity l_j - 1 for each group, plus all m singular values of G.
inline GroupSpectrum full_spectrum(const ImbalanceSpec& spec) {
  GroupSpectrum out;
  out.g = group_matrix(spec);
  const std::int64_t m = spec.num_groups();
  if (m == 1) {
    out.g_singulars = Vector::Zero(1);
  } else if (m == 2 || m == 3) {
    out.g_singulars = closed_form_g_singulars(spec);
  } else {
    out.g_singulars = svd_desc(out.g).s;
  }
  std::vector<double> values;
  for (const ImbalanceGroup& grp : spec.groups) {
    if (grp.class_count > 1)
      out.multiplicities.push_back({std::sqrt(static_cast<double>(grp.samples_per_class)),
                                    grp.class_count - 1, SpectrumSource::group_repeat});
    for (std::int64_t rep = 1; rep < grp.class_count; ++rep)
      values.push_back(std::sqrt(static_cast<double>(grp.samples_per_class)));
  }
  for (Index i = 0; i < out.g_singulars.size(); ++i) {
    out.multiplicities.push_back({out.g_singulars(i), 1, SpectrumSource::g_matrix});
    values.push_back(out.g_singulars(i));
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  std::sort(out.multiplicities.begin(), out.multiplicities.end(),
            [](const SpectrumEntry& a, const SpectrumEntry& b) { return a.value > b.value; });
  out.full_singulars = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return out;
}

}  // namespace eufm
