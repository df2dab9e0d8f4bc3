#include "dpplearn/linalg.hpp"
#include "dpplearn/moments.hpp"
#include "dpplearn/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace dpplearn;

TEST(SampleDpp, ZeroKernelGivesEmptySet) {
  SamplerRng rng(1);
  const DppSampler s(MatrixXd::Zero(5, 5));
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(s.sample_dpp(rng).empty());
}

TEST(SampleDpp, ScaledIdentityIsIndependent) {
  const double c = 0.7;
  const int n = 6, R = 50000;
  const DppSampler s(c * MatrixXd::Identity(n, n));
  SamplerRng rng(2);
  std::vector<int> hits(n, 0);
  for (int r = 0; r < R; ++r)
    for (auto i : s.sample_dpp(rng)) ++hits[i];
  const double p = c / (1 + c);
  const double se = std::sqrt(p * (1 - p) / R);
  for (int i = 0; i < n; ++i) EXPECT_LT(std::abs(hits[i] / double(R) - p), 3.5 * se);
}

TEST(SampleDpp, InclusionMatchesMarginalKernel) {
  const GroundSet g = lattice({10, 10}, 1.0, {-4.5, -4.5});
  const MatrixXd L = build_discrete_kernel(g, {{0.5, 0.5}, {0.1, 0.2}}).L;
  const MatrixXd K = marginal_kernel(L);
  const DppSampler s(L);
  SamplerRng rng(3);
  const int R = 20000;
  std::vector<int> hits(100, 0);
  double card = 0;
  for (int r = 0; r < R; ++r) {
    const auto A = s.sample_dpp(rng);
    card += static_cast<double>(A.size());
    for (auto i : A) ++hits[i];
  }
  int outside = 0;
  for (int i = 0; i < 100; ++i) {
    const double p = K(i, i);
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / R);
    if (std::abs(hits[i] / double(R) - p) > 3.5 * se + 1e-9) ++outside;
  }
  EXPECT_LE(outside, 1);
  double var = 0;
  for (int i = 0; i < 100; ++i) var += K(i, i) * (1 - K(i, i));
  EXPECT_LT(std::abs(card / R - K.trace()), 3.5 * std::sqrt(var / R));
}

TEST(SampleKdpp, EdgeCases) {
  const MatrixXd L = MatrixXd::Identity(4, 4) * 2.0;
  SamplerRng rng(4);
  const DppSampler s(L);
  EXPECT_TRUE(s.sample_kdpp(0, rng).empty());
  EXPECT_EQ(s.sample_kdpp(4, rng), (IndexSet{0, 1, 2, 3}));
  EXPECT_THROW(s.sample_kdpp(5, rng), ConfigError);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s.sample_kdpp(2, rng).size(), 2u);
}

TEST(SampleKdpp, ChiSquareAgainstEnumeration) {
  const GroundSet g = lattice({6}, 0.5, {-1.25});
  const MatrixXd L = build_discrete_kernel(g, {{2.0}, {0.3}}).L;
  std::map<IndexSet, double> prob;
  double Z = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) {
      const double d = linalg::principal_submatrix(L, {i, j}).determinant();
      prob[{i, j}] = d;
      Z += d;
    }
  const DppSampler s(L);
  SamplerRng rng(5);
  const int R = 100000;
  std::map<IndexSet, int> count;
  for (int r = 0; r < R; ++r) ++count[s.sample_kdpp(2, rng)];
  double chi2 = 0;
  for (auto& [A, p] : prob) {
    const double e = R * p / Z;
    chi2 += (count[A] - e) * (count[A] - e) / e;
  }
  // 14 degrees of freedom; 0.99 quantile is 29.14.
  EXPECT_LT(chi2, 29.14);
}

TEST(SampleDpp, DeterministicUnderSeed) {
  const MatrixXd L = build_discrete_kernel(lattice({5, 5}, 1.0, {-2, -2}), {{2, 2}, {0.5, 0.5}}).L;
  EXPECT_EQ(sample_dpp(L, 9), sample_dpp(L, 9));
  EXPECT_EQ(sample_kdpp(L, 3, 9), sample_kdpp(L, 3, 9));
}

TEST(GridSampler, PreconditionsAreChecked) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  EXPECT_THROW(GridDppSampler(th, GridSpec::with_spacing({-1, -1}, {1, 1}, 0.2)), ConfigError);
  EXPECT_THROW(GridDppSampler(th, GridSpec::with_spacing({-4, -4}, {4, 4}, 0.5)), ConfigError);
}

TEST(GridSampler, TinyAlphaGivesEmptySets) {
  const auto th = GaussianTheta::isotropic(1e-6, 1, 1, 1);
  const auto s = sample_continuous_via_grid(th, GridSpec::with_spacing({-4}, {4}, 0.2), 200, 6);
  int nonempty = 0;
  for (const auto& p : s) nonempty += p.empty() ? 0 : 1;
  EXPECT_LE(nonempty, 1);
}

TEST(GridSampler, ScenarioOneMomentsMatchClosedForm) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  const GridSpec grid = GridSpec::with_spacing({-4, -4}, {4, 4}, 0.2);
  const auto draws = sample_continuous_via_grid(th, grid, 2000, 7);
  const auto emp0 = empirical_moment(draws, 2, 0);
  const auto emp2 = empirical_moment(draws, 2, 2);
  const auto cm = continuous_gaussian_moments(th, {0, 2});
  EXPECT_NEAR(emp0.mean[0], 18.0, 2.0);
  EXPECT_LT(std::abs(emp0.mean[0] - cm[0].per_dim[0]), 3.5 * emp0.se[0] + 0.05);
  for (std::size_t d = 0; d < 2; ++d)
    EXPECT_LT(std::abs(emp2.mean[d] - cm[1].per_dim[d]), 3.5 * emp2.se[d] + 0.02 * cm[1].per_dim[d]);
  for (const auto& p : draws)
    for (Eigen::Index i = 0; i < p.points.rows(); ++i) EXPECT_LE(p.points.row(i).cwiseAbs().maxCoeff(), 4.0);
}
