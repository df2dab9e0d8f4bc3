#include "dpplearn/diagnostics.hpp"
#include "dpplearn/likelihood.hpp"
#include "dpplearn/mcmc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dpplearn;
using namespace dpplearn::mcmc;

namespace {

double std_normal(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return -0.5 * s;
}

double mean_of(const VectorXd& v) { return v.mean(); }
double var_of(const VectorXd& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1); }

// Interval of half-width 2^-level around the true value, exact after `levels` tightenings.
class FuzzyBounds final : public DensityBounds {
 public:
  FuzzyBounds(double v, int levels, double skew) : v_(v), levels_(levels), skew_(skew) {}
  double lower() const override { return v_ - width() * (1 + skew_); }
  double upper() const override { return v_ + width() * (1 - skew_); }
  bool exact() const override { return level_ >= levels_; }
  bool tighten() override {
    if (exact()) return false;
    ++level_;
    return true;
  }
  std::size_t level() const override { return static_cast<std::size_t>(level_); }

 private:
  double width() const { return exact() ? 0.0 : std::ldexp(1.0, -level_); }
  double v_;
  int levels_;
  double skew_;
  int level_ = 0;
};

BoundedLogDensity fuzzy_normal(int levels) {
  return [levels](std::span<const double> x) -> std::unique_ptr<DensityBounds> {
    return std::make_unique<FuzzyBounds>(std_normal(x), levels, 0.3);
  };
}

}  // namespace

TEST(RandomWalkMh, StandardNormalMoments) {
  const Chain c = rw_mh({3.0}, std_normal, ProposalSpec::uniform(1, 2.0), 60000, 1);
  const VectorXd x = c.column(0).tail(55000);
  EXPECT_NEAR(mean_of(x), 0.0, 0.06);
  EXPECT_NEAR(var_of(x), 1.0, 0.08);
  EXPECT_GT(c.acceptance_rate(), 0.2);
  EXPECT_LT(c.acceptance_rate(), 0.8);
}

TEST(RandomWalkMh, DeterministicUnderSeed) {
  const Chain a = rw_mh({0.0, 0.0}, std_normal, ProposalSpec::uniform(2, 0.5), 500, 42);
  const Chain b = rw_mh({0.0, 0.0}, std_normal, ProposalSpec::uniform(2, 0.5), 500, 42);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_THROW(rw_mh({0.0}, std_normal, ProposalSpec::uniform(2, 0.5), 10, 1), ConfigError);
}

TEST(SliceSampling, UnivariateNormalMoments) {
  const Chain c = slice_univariate(5.0, std_normal, 1.0, 30000, 3);
  const VectorXd x = c.column(0).tail(29000);
  EXPECT_NEAR(mean_of(x), 0.0, 0.05);
  EXPECT_NEAR(var_of(x), 1.0, 0.06);
}

TEST(SliceSampling, UnivariateExponentialWithBoundary) {
  auto f = [](std::span<const double> x) { return x[0] < 0 ? -std::numeric_limits<double>::infinity() : -x[0]; };
  const Chain c = slice_univariate(1.0, f, 0.5, 40000, 9);
  EXPECT_NEAR(mean_of(c.column(0)), 1.0, 0.05);
}

TEST(SliceSampling, HyperrectCorrelatedGaussian) {
  // Precision matrix of a correlation-0.8 Gaussian.
  auto f = [](std::span<const double> x) {
    const double r = 0.8;
    return -0.5 * (x[0] * x[0] - 2 * r * x[0] * x[1] + x[1] * x[1]) / (1 - r * r);
  };
  const Chain c = slice_hyperrect({2.0, -2.0}, f, {2.0, 2.0}, 40000, 5);
  const VectorXd a = c.column(0).tail(39000), b = c.column(1).tail(39000);
  EXPECT_NEAR(mean_of(a), 0.0, 0.08);
  EXPECT_NEAR(var_of(a), 1.0, 0.1);
  const double cov = ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / static_cast<double>(a.size() - 1);
  EXPECT_NEAR(cov, 0.8, 0.1);
}

TEST(BoundedMh, ExactBoundsReproduceExactMh) {
  BoundedLogDensity exact = [](std::span<const double> x) -> std::unique_ptr<DensityBounds> {
    return std::make_unique<ExactBounds>(std_normal(x));
  };
  const Chain a = rw_mh({1.0, 1.0}, std_normal, ProposalSpec::uniform(2, 0.8), 2000, 77);
  const Chain b = bounded_mh({1.0, 1.0}, exact, ProposalSpec::uniform(2, 0.8), 2000, 77);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.accepted, b.accepted);
}

TEST(BoundedMh, FuzzyBoundsGiveSameDecisions) {
  // Decisions resolved from brackets must equal those of the exact value.
  const Chain a = rw_mh({1.0}, std_normal, ProposalSpec::uniform(1, 1.5), 3000, 8);
  std::size_t undecided_events = 0;
  BoundedOptions opt;
  opt.on_event = [&](const BoundedMhEvent& e) { undecided_events += e.decision == 0 ? 1 : 0; };
  const Chain b = bounded_mh({1.0}, fuzzy_normal(60), ProposalSpec::uniform(1, 1.5), 3000, 8, opt);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_LT((a.samples - b.samples).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(b.tightenings, 0u);
  EXPECT_GT(undecided_events, 0u);
}

TEST(BoundedMh, UnresolvableStepThrows) {
  // Bounds that never shrink and cannot be tightened.
  BoundedLogDensity stuck = [](std::span<const double> x) -> std::unique_ptr<DensityBounds> {
    return std::make_unique<FuzzyBounds>(std_normal(x), 0, 0.0);
  };
  BoundedLogDensity wide = [](std::span<const double> x) -> std::unique_ptr<DensityBounds> {
    class Wide final : public DensityBounds {
     public:
      explicit Wide(double v) : v_(v) {}
      double lower() const override { return v_ - 50; }
      double upper() const override { return v_ + 50; }
      bool exact() const override { return false; }
      bool tighten() override { return false; }

     private:
      double v_;
    };
    return std::make_unique<Wide>(std_normal(x));
  };
  EXPECT_NO_THROW(bounded_mh({0.0}, stuck, ProposalSpec::uniform(1, 1.0), 50, 1));
  EXPECT_THROW(bounded_mh({0.0}, wide, ProposalSpec::uniform(1, 1.0), 50, 1), BoundedStepUnresolved);
}

TEST(BoundedSlice, ExactBoundsReproduceExactSlice) {
  BoundedLogDensity exact = [](std::span<const double> x) -> std::unique_ptr<DensityBounds> {
    return std::make_unique<ExactBounds>(std_normal(x));
  };
  const Chain a = slice_hyperrect({0.5, -0.5}, std_normal, {1.5, 1.5}, 1000, 13);
  const Chain b = bounded_slice({0.5, -0.5}, exact, {1.5, 1.5}, 1000, 13);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(BoundedSlice, FuzzyBoundsTargetTheRightDistribution) {
  const Chain c = bounded_slice({2.0, 0.0}, fuzzy_normal(40), {2.0, 2.0}, 40000, 21);
  const VectorXd a = c.column(0).tail(39000);
  EXPECT_NEAR(mean_of(a), 0.0, 0.06);
  EXPECT_NEAR(var_of(a), 1.0, 0.08);
  EXPECT_GT(c.tightenings, 0u);
  const Chain u = bounded_slice({2.0}, fuzzy_normal(40), {1.0}, 30000, 22, true);
  EXPECT_NEAR(mean_of(u.column(0)), 0.0, 0.06);
  EXPECT_NEAR(var_of(u.column(0)), 1.0, 0.08);
}

TEST(Diagnostics, GelmanRubinIdenticalChains) {
  std::vector<double> s{0.1, -0.4, 0.3, 1.2, -0.7, 0.0};
  const Psrf r = gelman_rubin({s, s, s});
  EXPECT_NEAR(r.value, std::sqrt(5.0 / 6.0), 1e-12);
}

TEST(Diagnostics, GelmanRubinSeparatedChains) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> chains(4);
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < 500; ++i) chains[c].push_back(g(rng) + 5.0 * static_cast<double>(c));
  EXPECT_GT(gelman_rubin(chains).value, 3.0);
  const Psrf flat = gelman_rubin({{1, 1, 1}, {2, 2, 2}});
  EXPECT_TRUE(flat.infinite);
  EXPECT_THROW(gelman_rubin({{1.0, 2.0}}), ConfigError);
}

TEST(Diagnostics, AutocorrelationOfAr1) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> x(100000);
  double v = 0;
  for (auto& e : x) e = v = 0.6 * v + g(rng);
  const auto acf = autocorrelation(x, 3);
  EXPECT_EQ(acf.values[0], 1.0);
  EXPECT_NEAR(acf.values[1], 0.6, 0.02);
  EXPECT_NEAR(acf.values[2], 0.36, 0.02);
  const std::vector<double> c(10, 2.0);
  EXPECT_TRUE(autocorrelation(c, 2).constant);
}

TEST(Diagnostics, Quantile) {
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2}, 0.25), 1.25);
}
