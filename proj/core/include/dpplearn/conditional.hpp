#ifndef DPPLEARN_CONDITIONAL_HPP
#define DPPLEARN_CONDITIONAL_HPP

#include "dpplearn/likelihood.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dpplearn {

/// Items of 0..n-1 not in A, in increasing order.
IndexSet complement(std::size_t n, const IndexSet& A);

/// L^A = (((L + I_{A^c})^{-1})_{A^c})^{-1} - I over the complement of A,
/// rows ordered as complement(N, A). Throws NumericalError with the
/// reciprocal condition number when an intermediate matrix is singular.
MatrixXd conditional_kernel(const MatrixXd& L, const IndexSet& A);

/// P(b | A) for every candidate b outside A (single-item completion),
/// ordered as complement(N, A).
VectorXd conditional_probabilities(const MatrixXd& L, const IndexSet& A);

/// log P(A u B | A subset Y) under a k-DPP with k = |A| + |B|:
/// log det(L^A_B) - log e_{|B|}(eigenvalues of L^A).
double conditional_kdpp_log_prob(const MatrixXd& L, const IndexSet& A, const IndexSet& B);

/// One annotation: a partial set A completed by the items B (usually one).
struct Completion {
  IndexSet A;
  IndexSet B;
};

/// Sum over completions of log P(A u B | A).
double conditional_kdpp_log_likelihood(const MatrixXd& L, const std::vector<Completion>& samples);

struct ConditionalGroup {
  std::string name;
  std::shared_ptr<const KernelFamily> family;
  std::vector<Completion> samples;
};

/// Conditional k-DPP over several ground sets sharing the kernel parameters.
class ConditionalModel final : public Model {
 public:
  explicit ConditionalModel(std::vector<ConditionalGroup> groups);

  std::vector<std::string> parameter_names() const override;
  double log_likelihood(std::span<const double> theta) const override;
  /// Exact: no normalizer truncation is involved.
  std::unique_ptr<LikelihoodBounds> likelihood_bounds(std::span<const double> theta,
                                                      const TightenSchedule& sched) const override;
  const std::vector<ConditionalGroup>& groups() const { return groups_; }

 private:
  std::vector<ConditionalGroup> groups_;
};

}  // namespace dpplearn

#endif
