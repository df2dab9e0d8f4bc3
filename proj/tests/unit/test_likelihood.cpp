#include "dpplearn/likelihood.hpp"
#include "dpplearn/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dpplearn;

namespace {

GroundSet small_grid() { return lattice({4, 4}, 1.0, {-1.5, -1.5}); }

}  // namespace

TEST(Likelihood, DppMatchesDirectDeterminants) {
  const GroundSet g = small_grid();
  const MatrixXd L = build_discrete_kernel(g, {{2.0, 2.0}, {0.5, 0.8}}).L;
  const std::vector<IndexSet> data{{0, 5, 10}, {3}, {}, {1, 14}};
  double want = 0;
  const MatrixXd I = MatrixXd::Identity(16, 16);
  for (const auto& A : data) {
    MatrixXd LA = linalg::principal_submatrix(L, A);
    want += A.empty() ? 0.0 : std::log(LA.determinant());
    want -= std::log((L + I).determinant());
  }
  EXPECT_NEAR(dpp_log_likelihood(L, data), want, 1e-10);
}

TEST(Likelihood, KdppMatchesEnumeration) {
  const GroundSet g = lattice({10}, 0.4, {-2.0});
  const MatrixXd L = build_discrete_kernel(g, {{3.0}, {0.3}}).L;
  double Z = 0;
  for (unsigned mask = 0; mask < 1024; ++mask) {
    if (__builtin_popcount(mask) != 3) continue;
    IndexSet A;
    for (std::size_t i = 0; i < 10; ++i)
      if (mask & (1u << i)) A.push_back(i);
    Z += linalg::principal_submatrix(L, A).determinant();
  }
  EXPECT_NEAR(kdpp_log_normalizer(L, 3), std::log(Z), 1e-8 * std::abs(std::log(Z)));
  const std::vector<IndexSet> data{{0, 4, 9}};
  EXPECT_NEAR(kdpp_log_likelihood(L, data, 3),
              std::log(linalg::principal_submatrix(L, data[0]).determinant() / Z), 1e-8);
  EXPECT_THROW(kdpp_log_likelihood(L, {{0, 1}}, 3), ConfigError);
}

TEST(Likelihood, RepeatedItemsAndBadIndices) {
  const MatrixXd L = MatrixXd::Identity(3, 3);
  EXPECT_EQ(dpp_log_likelihood(L, {{0, 0}}), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(dpp_log_likelihood(L, {{5}}), ConfigError);
  EXPECT_NEAR(dpp_log_likelihood(L, {{}}), -3 * std::log(2.0), 1e-15);
}

TEST(Prior, InverseGamma) {
  InvGammaPrior p{2.0, 3.0};
  EXPECT_NEAR(p.log_density(1.5), -3.0 * std::log(1.5) - 2.0, 1e-15);
  EXPECT_EQ(p.log_density(-1), -std::numeric_limits<double>::infinity());
  EXPECT_THROW((InvGammaPrior{0.0, 1.0}.validate()), ConfigError);
}

TEST(Families, GaussianQualitySimilarityKernel) {
  const GroundSet g = small_grid();
  GaussianQualitySimilarityFamily f(g);
  const std::vector<double> th{0.5, 0.6, 0.1, 0.2};
  EXPECT_EQ(f.parameter_names(), (std::vector<std::string>{"gamma_1", "gamma_2", "sigma_1", "sigma_2"}));
  EXPECT_LT((f.kernel(th) - build_discrete_kernel(g, {{0.5, 0.6}, {0.1, 0.2}}).L).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DiscreteModel, BoundsBracketAndConvergeToExact) {
  const GroundSet g = lattice({8, 8}, 1.0, {-3.5, -3.5});
  auto fam = std::make_shared<GaussianQualitySimilarityFamily>(g);
  const std::vector<IndexSet> data{{0, 9, 27}, {36, 45}, {20}};
  DiscreteModel model(fam, data, Process::Dpp);
  const std::vector<double> th{4.0, 4.0, 0.3, 0.5};
  const double exact = model.log_likelihood(th);
  auto b = model.likelihood_bounds(th, {});
  double prev_w = std::numeric_limits<double>::infinity();
  for (;;) {
    EXPECT_LE(b->lower(), exact + 1e-9);
    EXPECT_GE(b->upper(), exact - 1e-9);
    const double w = b->upper() - b->lower();
    EXPECT_LE(w, prev_w + 1e-12);
    prev_w = w;
    if (!b->tighten()) break;
  }
  EXPECT_TRUE(b->exact());
  EXPECT_EQ(b->lower(), exact);
  EXPECT_EQ(b->upper(), exact);
}

TEST(DiscreteModel, KdppBoundsConverge) {
  const GroundSet g = lattice({6, 6}, 1.0, {-2.5, -2.5});
  auto fam = std::make_shared<GaussianSimilarityFamily>(g);
  const std::vector<IndexSet> data{{0, 7, 14, 21}, {1, 2, 30, 35}};
  DiscreteModel model(fam, data, Process::KDpp, 4);
  const std::vector<double> th{0.4, 0.6};
  const double exact = model.log_likelihood(th);
  auto b = model.likelihood_bounds(th, {2, 1 << 20});
  while (b->tighten()) {
    EXPECT_LE(b->lower(), exact + 1e-9);
    EXPECT_GE(b->upper(), exact - 1e-9);
  }
  EXPECT_NEAR(b->lower(), exact, 1e-12);
  EXPECT_THROW(DiscreteModel(fam, {{0, 1}}, Process::KDpp, 4), ConfigError);
}

TEST(ContinuousModel, BoundsBracketCloseValue) {
  std::vector<PointConfig> data;
  MatrixXd p(3, 2);
  p << 0.1, 0.2, -1.0, 0.5, 0.7, -0.8;
  data.emplace_back(p);
  data.emplace_back(MatrixXd(p.topRows(2)));
  data.emplace_back(PointConfig(2));
  ContinuousGaussianModel model(2, true, data, Process::Dpp);
  const std::vector<double> th{50.0, 1.0, 0.3};
  const double ll = model.log_likelihood(th);
  auto b = model.likelihood_bounds(th, {});
  EXPECT_LE(b->lower(), ll + 1e-9);
  EXPECT_GE(b->upper(), ll - 1e-9);
  while (b->tighten()) {
  }
  EXPECT_NEAR(b->lower(), ll, 1e-8);
  EXPECT_NEAR(b->upper(), ll, 1e-8);
}

TEST(ContinuousModel, RepeatedPointsAndDomain) {
  MatrixXd p(2, 1);
  p << 0.3, 0.3;
  ContinuousGaussianModel model(1, true, {PointConfig(p)}, Process::Dpp);
  EXPECT_EQ(model.log_likelihood(std::vector<double>{5, 1, 1}), -std::numeric_limits<double>::infinity());
  ContinuousGaussianModel::Box box{{-0.1}, {0.1}};
  EXPECT_THROW(ContinuousGaussianModel(1, true, {PointConfig(p)}, Process::Dpp, 0, box), ConfigError);
  ContinuousGaussianModel kmodel(1, true, {PointConfig(p)}, Process::KDpp, 2);
  EXPECT_THROW(kmodel.log_likelihood(std::vector<double>{5, 1, 1}), ConfigError);
}

TEST(ContinuousModel, GammaInvarianceUnderRescaling) {
  // x -> eta x with rho, sigma -> eta^2 rho, eta^2 sigma shifts the
  // log-likelihood by a theta-free constant, so gamma = sigma / rho is preserved.
  MatrixXd p(4, 2);
  p << 0.1, 0.2, -1.0, 0.5, 0.7, -0.8, 1.2, 1.1;
  for (double eta : {0.5, 2.0}) {
    ContinuousGaussianModel a(2, true, {PointConfig(p)}, Process::Dpp);
    ContinuousGaussianModel b(2, true, {PointConfig(MatrixXd(eta * p))}, Process::Dpp);
    const double d1 = b.log_likelihood(std::vector<double>{30, eta * eta * 1.0, eta * eta * 0.4}) -
                      a.log_likelihood(std::vector<double>{30, 1.0, 0.4});
    const double d2 = b.log_likelihood(std::vector<double>{80, eta * eta * 0.6, eta * eta * 0.9}) -
                      a.log_likelihood(std::vector<double>{80, 0.6, 0.9});
    EXPECT_NEAR(d1, d2, 1e-7);
    EXPECT_NEAR(d1, -4 * 2 * std::log(eta), 1e-7);
  }
}

TEST(Posterior, LogScaleIncludesJacobian) {
  const GroundSet g = small_grid();
  auto fam = std::make_shared<GaussianSimilarityFamily>(g);
  auto model = std::make_shared<DiscreteModel>(fam, std::vector<IndexSet>{{0, 5}}, Process::Dpp);
  Posterior post(model, {InvGammaPrior{}, InvGammaPrior{}});
  const std::vector<double> z{std::log(0.3), std::log(0.7)};
  const std::vector<double> th{0.3, 0.7};
  EXPECT_NEAR(post.log_density_log_scale(z), post.log_posterior(th) + z[0] + z[1], 1e-12);
  auto b = post.bounds_log_scale(z, {});
  while (b->tighten()) {
  }
  EXPECT_EQ(b->lower(), post.log_density_log_scale(z));
  EXPECT_THROW(Posterior(model, {InvGammaPrior{}}), ConfigError);
}
