#include "dpplearn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpplearn::mcmc {

Autocorrelation autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) throw ConfigError("series must be longer than the maximum lag");
  Autocorrelation out;
  out.values.assign(max_lag + 1, 0.0);
  out.values[0] = 1.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  if (!(c0 > 0.0)) {
    out.constant = true;
    return out;
  }
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) c += (series[t] - mean) * (series[t + lag] - mean);
    out.values[lag] = c / c0;
  }
  return out;
}

Psrf gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ConfigError("Gelman-Rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw ConfigError("Gelman-Rubin needs chains of length >= 2");
  for (const auto& c : chains)
    if (c.size() != n) throw ConfigError("Gelman-Rubin needs equal-length chains");
  const auto m = static_cast<double>(chains.size());
  const auto nn = static_cast<double>(n);
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    double mu = 0.0;
    for (double v : c) mu += v;
    mu /= nn;
    double s2 = 0.0;
    for (double v : c) s2 += (v - mu) * (v - mu);
    w += s2 / (nn - 1.0);
    means.push_back(mu);
  }
  w /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= nn / (m - 1.0);
  Psrf r;
  if (!(w > 0.0)) {
    if (b > 0.0) {
      r.value = std::numeric_limits<double>::infinity();
      r.infinite = true;
    }
    return r;
  }
  const double var_plus = (nn - 1.0) / nn * w + b / nn;
  r.value = std::sqrt(var_plus / w);
  return r;
}

std::vector<double> trace(const Chain& chain, std::size_t j, std::size_t burnin, std::size_t thin) {
  if (thin == 0) thin = 1;
  std::vector<double> out;
  for (std::size_t i = burnin; i < chain.size(); i += thin)
    out.push_back(chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return out;
}

std::vector<Psrf> gelman_rubin(const std::vector<Chain>& chains, std::size_t burnin) {
  if (chains.empty()) throw ConfigError("no chains");
  const std::size_t dim = chains.front().dim();
  std::vector<Psrf> out;
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<std::vector<double>> cols;
    for (const auto& c : chains) cols.push_back(trace(c, j, burnin));
    out.push_back(gelman_rubin(cols));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace dpplearn::mcmc
