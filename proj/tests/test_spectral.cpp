#include "eufm/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

namespace {

using eufm::Index;
using eufm::Matrix;
using eufm::Vector;

std::vector<std::int64_t> random_counts(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k_dist(2, 10);
  std::uniform_int_distribution<std::int64_t> n_dist(1, 50);
  const int k_cls = k_dist(rng);
  std::vector<std::int64_t> counts;
  for (int i = 0; i < k_cls; ++i) counts.push_back(n_dist(rng));
  return counts;
}

// Exactly m distinct per-class counts, each assigned to a random number of classes.
std::vector<std::int64_t> random_counts_with_groups(std::mt19937_64& rng, int m) {
  std::uniform_int_distribution<std::int64_t> n_dist(1, 60);
  std::uniform_int_distribution<int> l_dist(1, 4);
  std::set<std::int64_t> distinct;
  while (static_cast<int>(distinct.size()) < m) distinct.insert(n_dist(rng));
  std::vector<std::int64_t> counts;
  for (std::int64_t n : distinct)
    for (int rep = l_dist(rng); rep > 0; --rep) counts.push_back(n);
  if (counts.size() < 2) counts.push_back(counts.front());
  return counts;
}

TEST(GroupMatrix, SmallImbalancedExample) {
  const Matrix g = eufm::group_matrix(eufm::spec_from_counts({3, 1}));
  ASSERT_EQ(g.rows(), 2);
  Matrix expect(2, 2);
  const double s3 = std::sqrt(3.0);
  expect << s3 / 4.0, -0.75, -s3 / 4.0, 0.75;
  EXPECT_LE((g - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ClosedForm, TwoGroupSingularValues) {
  // K * N1 * N2 / N with one zero: [3,1] -> sqrt(2*3*1/4) = sqrt(1.5).
  const Vector s = eufm::closed_form_g_singulars(eufm::spec_from_counts({3, 1}));
  ASSERT_EQ(s.size(), 2);
  EXPECT_NEAR(s(0), std::sqrt(1.5), 1e-14);
  EXPECT_DOUBLE_EQ(s(1), 0.0);

  // [8,8,2,2]: sqrt(4*8*2/20) = sqrt(3.2).
  const Vector s2 = eufm::closed_form_g_singulars(eufm::spec_from_counts({8, 8, 2, 2}));
  EXPECT_NEAR(s2(0), std::sqrt(3.2), 1e-14);
}

TEST(ClosedForm, ThreeGroupSingularValues) {
  // counts [4,2,1]: quadratic coefficients a = 4, b = 24/7; the singular values
  // are the square roots of its roots (frozen from a direct-SVD oracle).
  const eufm::ImbalanceSpec spec = eufm::spec_from_counts({4, 2, 1});
  const Vector s = eufm::closed_form_g_singulars(spec);
  ASSERT_EQ(s.size(), 3);
  EXPECT_NEAR(s(0), 1.660099077169328, 1e-12);
  EXPECT_NEAR(s(1), 1.1153793318784178, 1e-12);
  EXPECT_DOUBLE_EQ(s(2), 0.0);
  // Roots multiply to b and sum to a.
  EXPECT_NEAR(s(0) * s(0) * s(1) * s(1), 24.0 / 7.0, 1e-12);
  EXPECT_NEAR(s(0) * s(0) + s(1) * s(1), 4.0, 1e-12);
}

TEST(ClosedForm, UnavailableBeyondThreeGroups) {
  const eufm::ImbalanceSpec spec = eufm::spec_from_counts({9, 7, 5, 3});
  try {
    eufm::closed_form_g_singulars(spec);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("closed form unavailable"), std::string::npos);
  }
}

TEST(ClosedForm, MatchesDirectSvdOfG) {
  std::mt19937_64 rng(101);
  for (int m : {2, 3}) {
    for (int trial = 0; trial < 50; ++trial) {
      const eufm::ImbalanceSpec spec = eufm::spec_from_counts(random_counts_with_groups(rng, m));
      ASSERT_EQ(spec.num_groups(), m);
      const Vector closed = eufm::closed_form_g_singulars(spec);
      const Vector direct = eufm::svd_desc(eufm::group_matrix(spec)).s;
      ASSERT_EQ(closed.size(), direct.size());
      for (Index i = 0; i < closed.size(); ++i) EXPECT_NEAR(closed(i), direct(i), 1e-10);
    }
  }
}

TEST(FullSpectrum, StepImbalanceFourClasses) {
  const eufm::GroupSpectrum sp = eufm::full_spectrum(eufm::spec_from_counts({8, 8, 2, 2}));
  ASSERT_EQ(sp.full_singulars.size(), 4);
  EXPECT_NEAR(sp.full_singulars(0), std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(sp.full_singulars(1), std::sqrt(3.2), 1e-12);
  EXPECT_NEAR(sp.full_singulars(2), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(sp.full_singulars(3), 0.0, 1e-12);

  // Multiplicity table: sqrt(8) and sqrt(2) once each from group repeats, the
  // two G values once each; total multiplicity = K.
  std::int64_t total = 0;
  for (const eufm::SpectrumEntry& e : sp.multiplicities) total += e.multiplicity;
  EXPECT_EQ(total, 4);
  EXPECT_EQ(sp.multiplicities.front().source, eufm::SpectrumSource::group_repeat);
  EXPECT_NEAR(sp.multiplicities.front().value, std::sqrt(8.0), 1e-12);
}

TEST(FullSpectrum, BalancedSpecIsSingleGroup) {
  const eufm::GroupSpectrum sp = eufm::full_spectrum(eufm::spec_from_counts({5, 5, 5}));
  ASSERT_EQ(sp.full_singulars.size(), 3);
  EXPECT_NEAR(sp.full_singulars(0), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(sp.full_singulars(1), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(sp.full_singulars(2), 0.0, 1e-12);
}

TEST(FullSpectrum, MatchesDirectSvdOnRandomSpecs) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const eufm::ImbalanceSpec spec = eufm::spec_from_counts(random_counts(rng));
    const eufm::GroupSpectrum sp = eufm::full_spectrum(spec);
    const Vector direct = eufm::label_algebra(spec).svd.s;
    ASSERT_EQ(sp.full_singulars.size(), direct.size());
    for (Index i = 0; i < direct.size(); ++i)
      EXPECT_NEAR(sp.full_singulars(i), direct(i), 1e-9)
          << "trial " << trial << " position " << i;
  }
}

// sqrt(N_1) > g_1 > sqrt(N_2) > g_2 > ... > sqrt(N_m) > g_m = 0 whenever the
// groups are distinct.
TEST(FullSpectrum, GValuesStrictlyInterlaceGroupValues) {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 200; ++trial) {
    const eufm::ImbalanceSpec spec = eufm::spec_from_counts(random_counts(rng));
    const std::int64_t m = spec.num_groups();
    if (m < 2) continue;
    const eufm::GroupSpectrum sp = eufm::full_spectrum(spec);
    ASSERT_EQ(sp.g_singulars.size(), m);
    for (Index i = 0; i < m; ++i) {
      const double root_ni = std::sqrt(static_cast<double>(spec.groups[static_cast<std::size_t>(i)].samples_per_class));
      EXPECT_LT(sp.g_singulars(i), root_ni) << "trial " << trial;
      if (i + 1 < m) {
        const double root_next =
            std::sqrt(static_cast<double>(spec.groups[static_cast<std::size_t>(i) + 1].samples_per_class));
        EXPECT_GT(sp.g_singulars(i), root_next) << "trial " << trial;
      }
    }
    EXPECT_NEAR(sp.g_singulars(m - 1), 0.0, 1e-9);
  }
}

}  // namespace
