#ifndef DPPLEARN_MOMENTS_HPP
#define DPPLEARN_MOMENTS_HPP

#include "dpplearn/likelihood.hpp"
#include "dpplearn/mcmc.hpp"

#include <functional>
#include <span>
#include <vector>

namespace dpplearn {

/// K = L (I + L)^{-1}, computed as I - (I + L)^{-1} and symmetrized.
MatrixXd marginal_kernel(const MatrixXd& L);

/// Per-dimension sum_i x_i^m K_ii over the ground items.
VectorXd discrete_moment(const DiscreteKernel& kernel, int m);
VectorXd discrete_moment(const GroundSet& ground, const MatrixXd& K, int m);

/// Per-dimension moments of one order.
struct MomentValues {
  int order = 0;
  std::vector<double> per_dim;
};

/// Closed-form zeroth, second and fourth moments of the continuous Gaussian
/// DPP, summed over the top M eigenvalues (M = 0 picks the smallest power of
/// two whose trace gap is below 1e-6 alpha). Odd orders are zero. Throws
/// NumericalError when the truncation leaves a larger tail, and ConfigError
/// for even orders above 4.
std::vector<MomentValues> continuous_gaussian_moments(const GaussianTheta& theta, const std::vector<int>& orders,
                                                      std::size_t M = 0);

/// Empirical per-dimension moments: per sample sum_points x^m, then averaged
/// over samples, with the standard error of that mean.
struct EmpiricalMoment {
  std::vector<double> mean;
  std::vector<double> se;
};
EmpiricalMoment empirical_moment(const std::vector<PointConfig>& samples, std::size_t dim, int m);

struct MomentReport {
  int order = 0;
  std::size_t dim = 0;          // 0-based coordinate
  double theoretical_mean = 0.0;
  double band_lo = 0.0;         // 2.5% quantile over posterior samples
  double band_hi = 0.0;         // 97.5% quantile
  double empirical = 0.0;
  double empirical_se = 0.0;
  double discrepancy = 0.0;     // empirical - theoretical_mean
  bool inside_band() const { return empirical >= band_lo && empirical <= band_hi; }
};

struct MomentCheckOptions {
  std::vector<int> orders{0, 2};
  std::size_t burnin = 0;
  std::size_t thin = 1;
  bool log_scale = true;  // chain rows hold log-parameters
};

/// Posterior-predictive moment bands for a continuous Gaussian model.
std::vector<MomentReport> moment_check(const mcmc::Chain& chain, const std::vector<PointConfig>& data,
                                       const ContinuousGaussianModel& model, const MomentCheckOptions& options = {});

/// Same for a discrete model whose ground items are spatial coordinates.
std::vector<MomentReport> moment_check(const mcmc::Chain& chain, const std::vector<IndexSet>& data,
                                       const KernelFamily& family, const MomentCheckOptions& options = {});

/// Grid search over one or two parameters minimizing the summed squared
/// relative discrepancy between theoretical and target moments.
struct MomentMatch {
  std::vector<double> theta;
  double loss = 0.0;
};
MomentMatch moment_match_grid(const std::vector<std::vector<double>>& axes,
                              const std::function<std::vector<double>(std::span<const double>)>& theoretical,
                              const std::vector<double>& target);

}  // namespace dpplearn

#endif
