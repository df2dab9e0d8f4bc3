#ifndef DPPLEARN_SAMPLING_HPP
#define DPPLEARN_SAMPLING_HPP

#include "dpplearn/kernels.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace dpplearn {

using SamplerRng = std::mt19937_64;

/// Exact spectral sampler for a fixed kernel; the eigendecomposition is
/// computed once and reused across draws.
class DppSampler {
 public:
  explicit DppSampler(const MatrixXd& L);

  /// Each eigenvector kept with probability lambda / (1 + lambda), then the
  /// orthogonalizing item-selection loop. Returned indices are sorted.
  IndexSet sample_dpp(SamplerRng& rng) const;
  /// Exactly k items with probability proportional to det(L_A).
  IndexSet sample_kdpp(std::size_t k, SamplerRng& rng) const;

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const VectorXd& eigenvalues() const { return values_; }

 private:
  IndexSet select_items(const std::vector<Eigen::Index>& chosen, SamplerRng& rng) const;

  VectorXd values_;   // clamped at zero
  MatrixXd vectors_;
};

IndexSet sample_dpp(const MatrixXd& L, std::uint64_t seed);
IndexSet sample_kdpp(const MatrixXd& L, std::size_t k, std::uint64_t seed);

/// Regular grid of cell centers covering an axis-aligned box.
struct GridSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::size_t> counts;  // cells per dimension

  std::size_t dim() const { return lo.size(); }
  double spacing(std::size_t d) const { return (hi[d] - lo[d]) / static_cast<double>(counts[d]); }
  double cell_volume() const;
  void validate() const;
  /// Grid with the given spacing (rounded up to whole cells) on the box.
  static GridSpec with_spacing(std::vector<double> lo, std::vector<double> hi, double spacing);
};

/// Fraction of the Gaussian quality mass q(x)^2 / alpha inside the box.
double quality_coverage(const GaussianTheta& theta, const GridSpec& grid);

/// Approximate continuous Gaussian DPP sampler: the operator is discretized
/// on the grid as L(x_i, x_j) times the cell volume, sampled exactly, and
/// every selected cell center jittered uniformly inside its cell.
class GridDppSampler {
 public:
  /// Throws ConfigError when the box covers less than 1 - 1e-4 of the
  /// quality mass or the spacing exceeds min_d sqrt(sigma_d) / 3.
  GridDppSampler(const GaussianTheta& theta, GridSpec grid);

  PointConfig sample(SamplerRng& rng) const;
  const GroundSet& ground() const { return ground_; }
  const MatrixXd& kernel() const { return L_; }
  const DppSampler& sampler() const { return sampler_; }

 private:
  GridSpec grid_;
  GroundSet ground_;
  MatrixXd L_;
  DppSampler sampler_;
};

std::vector<PointConfig> sample_continuous_via_grid(const GaussianTheta& theta, const GridSpec& grid,
                                                    std::size_t count, std::uint64_t seed);

}  // namespace dpplearn

#endif
