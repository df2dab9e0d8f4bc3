#ifndef DPPLEARN_DIAGNOSTICS_HPP
#define DPPLEARN_DIAGNOSTICS_HPP

#include "dpplearn/mcmc.hpp"

#include <span>
#include <vector>

namespace dpplearn::mcmc {

struct Autocorrelation {
  std::vector<double> values;  // lag 0..max_lag
  bool constant = false;       // zero-variance input
};

/// Biased sample ACF: r(l) = sum_t (x_t - m)(x_{t+l} - m) / sum_t (x_t - m)^2.
Autocorrelation autocorrelation(std::span<const double> series, std::size_t max_lag);

struct Psrf {
  double value = 1.0;
  bool infinite = false;  // zero within-chain variance with between-chain spread
};

/// Potential scale reduction factor sqrt(((n-1)/n W + B/n) / W) of one
/// scalar across equal-length chains.
Psrf gelman_rubin(const std::vector<std::vector<double>>& chains);

/// One PSRF per parameter column of the given chains, optionally discarding
/// the first `burnin` rows of each.
std::vector<Psrf> gelman_rubin(const std::vector<Chain>& chains, std::size_t burnin = 0);

/// Column j of a chain after burn-in and thinning.
std::vector<double> trace(const Chain& chain, std::size_t j, std::size_t burnin = 0, std::size_t thin = 1);

double quantile(std::vector<double> values, double q);

}  // namespace dpplearn::mcmc

#endif
