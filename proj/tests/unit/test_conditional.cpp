#include "dpplearn/conditional.hpp"
#include "dpplearn/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dpplearn;

namespace {

MatrixXd random_psd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd a(n, n + 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return a * a.transpose() / n;
}

double det_of(const MatrixXd& L, IndexSet A) {
  if (A.empty()) return 1.0;
  return linalg::principal_submatrix(L, A).determinant();
}

}  // namespace

TEST(ConditionalKernel, EmptyConditioningIsIdentityMap) {
  const MatrixXd L = random_psd(5, 1);
  EXPECT_LT((conditional_kernel(L, {}) - L).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ConditionalKernel, DiagonalKernel) {
  VectorXd d(5);
  d << 1, 2, 3, 4, 5;
  const MatrixXd L = d.asDiagonal();
  const MatrixXd LA = conditional_kernel(L, {1, 3});
  MatrixXd want = VectorXd((VectorXd(3) << 1, 3, 5).finished()).asDiagonal();
  EXPECT_LT((LA - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConditionalKernel, EqualsSchurComplement) {
  const MatrixXd L = random_psd(7, 2);
  const IndexSet A{0, 4};
  const IndexSet C = complement(7, A);
  const MatrixXd LAA = linalg::principal_submatrix(L, A);
  MatrixXd LCA(C.size(), A.size());
  for (std::size_t i = 0; i < C.size(); ++i)
    for (std::size_t j = 0; j < A.size(); ++j) LCA(i, j) = L(C[i], A[j]);
  const MatrixXd schur = linalg::principal_submatrix(L, C) - LCA * LAA.inverse() * LCA.transpose();
  EXPECT_LT((conditional_kernel(L, A) - schur).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ConditionalKernel, Errors) {
  const MatrixXd L = random_psd(4, 3);
  EXPECT_THROW(conditional_kernel(L, {0, 1, 2, 3}), ConfigError);
  EXPECT_THROW(conditional_kernel(L, {9}), ConfigError);
  MatrixXd singular = MatrixXd::Ones(4, 4);
  EXPECT_THROW(conditional_kernel(singular, {0, 1}), NumericalError);
}

TEST(ConditionalProbabilities, NormalizedAndMatchJointRatios) {
  for (int n = 3; n <= 10; ++n)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const MatrixXd L = random_psd(n, 100 * static_cast<std::uint64_t>(n) + seed);
      std::mt19937_64 rng(seed);
      IndexSet A;
      for (int i = 0; i < n; ++i)
        if (A.size() + 1 < static_cast<std::size_t>(n) && (rng() % 3 == 0)) A.push_back(static_cast<std::size_t>(i));
      const IndexSet C = complement(static_cast<std::size_t>(n), A);
      const VectorXd p = conditional_probabilities(L, A);
      EXPECT_NEAR(p.sum(), 1.0, 1e-10);
      double total = 0;
      std::vector<double> joint;
      for (auto b : C) {
        IndexSet Ab = A;
        Ab.push_back(b);
        joint.push_back(det_of(L, Ab));
        total += joint.back();
      }
      for (std::size_t i = 0; i < C.size(); ++i) EXPECT_NEAR(p(static_cast<Eigen::Index>(i)), joint[i] / total, 1e-8 * std::max(1.0, p(i)));
    }
}

TEST(ConditionalKdpp, MultiItemCompletionMatchesEnumeration) {
  const int n = 8;
  const MatrixXd L = random_psd(n, 11);
  const IndexSet A{2, 5};
  const IndexSet B{0, 7};
  // P(A u B | A) for a 4-DPP = det(L_{A u B}) / sum_{|B'| = 2, B' disjoint A} det(L_{A u B'})
  const IndexSet C = complement(n, A);
  double Z = 0;
  for (std::size_t i = 0; i < C.size(); ++i)
    for (std::size_t j = i + 1; j < C.size(); ++j) Z += det_of(L, {A[0], A[1], C[i], C[j]});
  const double want = std::log(det_of(L, {2, 5, 0, 7}) / Z);
  EXPECT_NEAR(conditional_kdpp_log_prob(L, A, B), want, 1e-8 * std::abs(want));
}

TEST(ConditionalKdpp, SingleCandidateAndErrors) {
  const MatrixXd L = random_psd(4, 12);
  EXPECT_NEAR(conditional_kdpp_log_prob(L, {0, 1, 2}, {3}), 0.0, 1e-12);
  EXPECT_THROW(conditional_kdpp_log_prob(L, {0, 1}, {1}), ConfigError);
}

TEST(ConditionalModel, SharedBandwidthsAcrossSubcategories) {
  FeatureSet f;
  f.block_names = {"color", "sift"};
  f.blocks = {MatrixXd(8, 2), MatrixXd(8, 2)};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto& b : f.blocks)
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  f.normalize_rows();
  auto fam = std::make_shared<FeatureFamily>(f);
  ConditionalGroup grp{"toy", fam, {{{0, 1, 2, 3, 4}, {5}}, {{1, 2, 3, 4, 5}, {7}}}};
  ConditionalModel model({grp, grp});
  const std::vector<double> th{0.5, 1.5};
  const MatrixXd L = fam->kernel(th);
  const double one = conditional_kdpp_log_likelihood(L, grp.samples);
  EXPECT_NEAR(model.log_likelihood(th), 2 * one, 1e-12);
  auto b = model.likelihood_bounds(th, {});
  EXPECT_TRUE(b->exact());
  EXPECT_EQ(model.parameter_names(), (std::vector<std::string>{"sigma_color", "sigma_sift"}));
  ConditionalGroup bad{"bad", fam, {{{0, 1}, {1}}}};
  EXPECT_THROW(ConditionalModel({bad}), ConfigError);
}
