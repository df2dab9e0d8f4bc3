#ifndef DPPLEARN_MCMC_HPP
#define DPPLEARN_MCMC_HPP

#include "dpplearn/bounds.hpp"
#include "dpplearn/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dpplearn::mcmc {

/// Samples of one chain, one row per iteration, on the sampler's own scale
/// (log-parameters when driven by a Posterior). The starting point is kept
/// separately and is not a row.
struct Chain {
  std::string sampler;
  std::uint64_t seed = 0;
  std::vector<double> start;
  std::vector<double> settings;         // proposal scales or slice widths
  MatrixXd samples;                     // iterations x dim
  std::vector<double> log_post;         // exact value, or the lower bound
  std::vector<double> log_post_upper;   // equals log_post for exact samplers
  std::vector<char> accepted;           // MH decisions; always 1 for slice samplers
  std::size_t tightenings = 0;          // bounded samplers only
  std::size_t max_level = 0;            // largest truncation used

  std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(samples.cols()); }
  double acceptance_rate() const;
  VectorXd column(std::size_t j) const { return samples.col(static_cast<Eigen::Index>(j)); }
};

/// Symmetric normal random walk; one scale per coordinate.
struct ProposalSpec {
  std::vector<double> scales;

  static ProposalSpec uniform(std::size_t dim, double scale = 0.1) {
    return {std::vector<double>(dim, scale)};
  }
  void validate(std::size_t dim) const;
};

Chain rw_mh(std::vector<double> start, const LogDensity& target, const ProposalSpec& proposal,
            std::size_t iterations, std::uint64_t seed);

/// Univariate slice sampling with linear stepping out (width w) and shrinkage.
Chain slice_univariate(double start, const LogDensity& target, double width, std::size_t iterations,
                       std::uint64_t seed);

/// Hyperrectangle slice sampling: a randomly placed box with the given
/// per-coordinate widths, shrunk toward the current point on rejection.
Chain slice_hyperrect(std::vector<double> start, const LogDensity& target, const std::vector<double>& widths,
                      std::size_t iterations, std::uint64_t seed);

/// Observation hook for bounded MH: called after every bound evaluation.
struct BoundedMhEvent {
  std::size_t step = 0;
  double log_u = 0.0;
  double log_r_lower = 0.0;
  double log_r_upper = 0.0;
  std::size_t level_current = 0;
  std::size_t level_proposal = 0;
  int decision = 0;  // 1 accept, -1 reject, 0 undecided
};

struct BoundedOptions {
  std::function<void(const BoundedMhEvent&)> on_event;
};

/// Random-walk MH that resolves each decision from posterior bounds,
/// tightening only while log u lies inside [log r-, log r+]. Throws
/// BoundedStepUnresolved when neither bound can be tightened further.
Chain bounded_mh(std::vector<double> start, const BoundedLogDensity& target, const ProposalSpec& proposal,
                 std::size_t iterations, std::uint64_t seed, const BoundedOptions& options = {});

/// Hyperrectangle slice sampling driven by posterior bounds. With
/// `univariate_stepping_out` and a one-dimensional start it performs the
/// stepping-out interval construction instead of the fixed box.
Chain bounded_slice(std::vector<double> start, const BoundedLogDensity& target, const std::vector<double>& widths,
                    std::size_t iterations, std::uint64_t seed, bool univariate_stepping_out = false);

}  // namespace dpplearn::mcmc

#endif
