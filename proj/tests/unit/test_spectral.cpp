#include "dpplearn/linalg.hpp"
#include "dpplearn/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dpplearn;

namespace {

MatrixXd grid_kernel(std::size_t side, double spacing) {
  const double off = -0.5 * spacing * static_cast<double>(side - 1);
  const GroundSet g = lattice({side, side}, spacing, {off, off});
  return build_discrete_kernel(g, {{0.5, 0.5}, {0.1, 0.2}}).L;
}

double log_det_plus_identity(const MatrixXd& L) {
  const MatrixXd I = MatrixXd::Identity(L.rows(), L.cols());
  return linalg::log_det_spd(L + I).value;
}

}  // namespace

TEST(LinAlg, LogDetEmptyAndJitter) {
  EXPECT_EQ(linalg::log_det_spd(MatrixXd(0, 0)).value, 0.0);
  MatrixXd a(2, 2);
  a << 2, 0, 0, 3;
  EXPECT_NEAR(linalg::log_det_spd(a).value, std::log(6.0), 1e-15);
  MatrixXd s = MatrixXd::Ones(3, 3);  // rank one
  const auto r = linalg::log_det_spd(s);
  EXPECT_TRUE(r.retries > 0 || !r.ok);
}

TEST(LinAlg, SubspaceIterationRitzValuesAreLowerBounds) {
  const MatrixXd L = grid_kernel(30, 0.1);
  const VectorXd full = linalg::sym_eigenvalues_desc(L);
  const auto pe = linalg::top_eigen_subspace(L, 20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_LE(pe.values(i), full(i) * (1 + 1e-12) + 1e-14);
    EXPECT_NEAR(pe.values(i), full(i), 1e-8 * full(0));
  }
}

TEST(DppBounds, ExactAtFullTruncation) {
  const MatrixXd L = grid_kernel(10, 1.0);
  const DiscreteSpectrum s(L);
  const auto nb = dpp_log_normalizer_bounds(s.top(100));
  EXPECT_EQ(nb.log_lower, nb.log_upper);
  EXPECT_NEAR(nb.log_lower, log_det_plus_identity(L), 1e-10);
}

TEST(DppBounds, MonotoneAndBracketing) {
  const MatrixXd L = grid_kernel(20, 0.25);
  const double truth = log_det_plus_identity(L);
  const DiscreteSpectrum s(L);
  double prev_lo = -1e300, prev_hi = 1e300;
  for (std::size_t M = 1; M <= 400; M *= 2) {
    const auto nb = dpp_log_normalizer_bounds(s.top(M));
    EXPECT_LE(nb.log_lower, truth + 1e-10);
    EXPECT_GE(nb.log_upper, truth - 1e-10);
    EXPECT_GE(nb.log_lower, prev_lo - 1e-12);
    EXPECT_LE(nb.log_upper, prev_hi + 1e-12);
    prev_lo = nb.log_lower;
    prev_hi = nb.log_upper;
  }
}

TEST(KdppBounds, BracketAndMeet) {
  const MatrixXd L = grid_kernel(12, 0.3);
  const VectorXd ev = linalg::sym_eigenvalues_desc(L).cwiseMax(0.0);
  const std::vector<double> lam(ev.data(), ev.data() + ev.size());
  const std::size_t k = 10;
  const double truth = elementary_symmetric(lam, k).log_value;
  const DiscreteSpectrum s(L);
  double prev_lo = -1e300, prev_hi = 1e300;
  for (std::size_t M = 10; M <= 144; M += 7) {
    const auto nb = kdpp_log_normalizer_bounds(s.top(M), k);
    EXPECT_LE(nb.log_lower, truth + 1e-10);
    EXPECT_GE(nb.log_upper, truth - 1e-10);
    EXPECT_GE(nb.log_lower, prev_lo - 1e-12);
    EXPECT_LE(nb.log_upper, prev_hi + 1e-9);
    prev_lo = nb.log_lower;
    prev_hi = nb.log_upper;
  }
  const auto full = kdpp_log_normalizer_bounds(s.top(144), k);
  EXPECT_NEAR(full.log_lower, truth, 1e-10);
  EXPECT_EQ(full.log_lower, full.log_upper);
}

TEST(KdppBounds, TruncationShorterThanK) {
  const MatrixXd L = grid_kernel(6, 0.5);
  const DiscreteSpectrum s(L);
  const auto nb = kdpp_log_normalizer_bounds(s.top(3), 5);
  EXPECT_EQ(nb.log_lower, -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(nb.log_upper));
}

TEST(Spectrum, LargeMatrixUsesSubspaceIteration) {
  const MatrixXd L = grid_kernel(25, 0.15);  // N = 625 > dense threshold
  const DiscreteSpectrum s(L);
  const auto t = s.top(16);
  EXPECT_FALSE(t.exact);
  const VectorXd full = linalg::sym_eigenvalues_desc(L);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(t.lambdas[i], full(static_cast<Eigen::Index>(i)), 1e-8 * full(0));
  EXPECT_TRUE(s.top(625).exact);
}

TEST(Spectrum, ContinuousTightenDoublesUntilCap) {
  const GaussianOperatorSpectrum s(GaussianTheta::isotropic(1000, 1, 1, 2));
  TightenSchedule sched{8, 64};
  auto t = initial_truncation(s, sched);
  EXPECT_EQ(t.size(), 8u);
  t = tighten(t, s, sched);
  EXPECT_EQ(t.size(), 16u);
  t = tighten(tighten(t, s, sched), s, sched);
  EXPECT_EQ(t.size(), 64u);
  EXPECT_EQ(tighten(t, s, sched).size(), 64u);
  EXPECT_GT(t.gap(), 0.0);
}

TEST(Spectrum, DiscreteTightenReachesExact) {
  const MatrixXd L = grid_kernel(5, 1.0);
  const DiscreteSpectrum s(L);
  auto t = initial_truncation(s);
  while (!t.exact) t = tighten(t, s);
  EXPECT_EQ(t.size(), 25u);
  EXPECT_EQ(t.gap(), 0.0);
}
