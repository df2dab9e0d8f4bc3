#ifndef DPPLEARN_MLE_HPP
#define DPPLEARN_MLE_HPP

#include "dpplearn/likelihood.hpp"

#include <span>
#include <string>
#include <vector>

namespace dpplearn::mle {

/// Log-likelihood and its gradient with respect to each scalar parameter.
struct GradReport {
  std::vector<std::string> names;
  std::vector<double> gradient;
  double objective = 0.0;
};

/// Gradient of the discrete DPP (or k-DPP) log-likelihood summed over the
/// groups. DPP terms use sum_t tr(L_A^{-1} dL_A) - T tr((L + I)^{-1} dL);
/// the k-DPP normalizer uses eigenvalue perturbation and needs N <= 200.
/// Throws NumericalError naming the sample whose submatrix is singular.
GradReport grad_log_likelihood(const std::vector<DiscreteGroup>& groups, std::span<const double> theta,
                               Process process = Process::Dpp, std::size_t k = 0);
GradReport grad_log_likelihood(const KernelFamily& family, std::span<const double> theta,
                               const std::vector<IndexSet>& data, Process process = Process::Dpp,
                               std::size_t k = 0);

/// Central finite differences of the same objective on the natural scale.
std::vector<double> finite_difference_gradient(const std::vector<DiscreteGroup>& groups,
                                               std::span<const double> theta, Process process = Process::Dpp,
                                               std::size_t k = 0, double h = 1e-5);

struct AscentOptions {
  double step = 1.0;          // nominal step on the log-parameter scale
  std::size_t max_iterations = 500;
  double tolerance = 1e-6;    // on the norm of the log-scale gradient
  int max_halvings = 30;
};

struct AscentStep {
  std::vector<double> theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct AscentResult {
  std::vector<double> theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;    // gradient norm below tolerance: a local stationary point
  std::string stop_reason;
  std::vector<AscentStep> trace;
};

/// Gradient ascent on z = log theta with backtracking (halving). Iterates
/// never decrease the objective.
AscentResult gradient_ascent(const std::vector<DiscreteGroup>& groups, std::vector<double> theta0,
                             const AscentOptions& options = {}, Process process = Process::Dpp,
                             std::size_t k = 0);

}  // namespace dpplearn::mle

#endif
