#ifndef DPPLEARN_SPECTRAL_HPP
#define DPPLEARN_SPECTRAL_HPP

#include "dpplearn/kernels.hpp"

#include <memory>
#include <optional>

namespace dpplearn {

enum class SpectrumKind { Discrete, Continuous };

/// Leading M eigenvalues (non-increasing) of a kernel plus its trace.
/// `exact` marks a truncation that holds the whole spectrum.
struct EigenTruncation {
  std::vector<double> lambdas;
  double trace = 0.0;
  SpectrumKind source = SpectrumKind::Discrete;
  bool exact = false;

  std::size_t size() const { return lambdas.size(); }
  /// trace - sum(lambdas), clamped at zero; exactly zero for exact truncations.
  double gap() const;
  void validate() const;
};

struct NormalizerBounds {
  double log_lower = 0.0;
  double log_upper = 0.0;
  std::size_t M_used = 0;

  double width() const { return log_upper - log_lower; }
};

/// Bounds on log prod_n (1 + lambda_n) from a truncation.
NormalizerBounds dpp_log_normalizer_bounds(const EigenTruncation& trunc);

/// Bounds on log e_k(lambda_{1:inf}) from a truncation.
NormalizerBounds kdpp_log_normalizer_bounds(const EigenTruncation& trunc, std::size_t k);

/// Supplies leading eigenvalues on demand.
class SpectrumSource {
 public:
  virtual ~SpectrumSource() = default;
  /// Truncation holding the top min(M, available) eigenvalues.
  virtual EigenTruncation top(std::size_t M) const = 0;
  /// Total number of eigenvalues, or nullopt for an operator.
  virtual std::optional<std::size_t> size() const = 0;
  virtual double trace() const = 0;
};

/// Discrete kernel matrix. Small matrices (N <= 512) are fully diagonalized
/// once; larger ones use block subspace iteration per request and only fall
/// back to a full eigensolve when M reaches N.
class DiscreteSpectrum final : public SpectrumSource {
 public:
  explicit DiscreteSpectrum(MatrixXd L, std::size_t dense_threshold = 512);
  EigenTruncation top(std::size_t M) const override;
  std::optional<std::size_t> size() const override { return static_cast<std::size_t>(L_.rows()); }
  double trace() const override { return trace_; }
  const MatrixXd& matrix() const { return L_; }

 private:
  MatrixXd L_;
  double trace_;
  std::size_t dense_threshold_;
  mutable std::optional<VectorXd> full_;  // lazily computed full spectrum
  mutable MatrixXd warm_;                 // last Ritz basis (large N)
};

/// Continuous Gaussian operator; eigenvalues by best-first lattice enumeration.
class GaussianOperatorSpectrum final : public SpectrumSource {
 public:
  explicit GaussianOperatorSpectrum(GaussianTheta theta);
  EigenTruncation top(std::size_t M) const override;
  std::optional<std::size_t> size() const override { return std::nullopt; }
  double trace() const override { return theta_.alpha; }

 private:
  GaussianTheta theta_;
};

struct TightenSchedule {
  std::size_t initial_M = 8;  // first truncation size
  std::size_t max_M = std::size_t{1} << 20;
};

/// First truncation of the schedule.
EigenTruncation initial_truncation(const SpectrumSource& source, const TightenSchedule& sched = {});

/// Doubles M (capped by the spectrum size and sched.max_M). Returns the
/// input unchanged when it is already exact or at the cap; callers check
/// `exact` / size() to tell the cases apart.
EigenTruncation tighten(const EigenTruncation& trunc, const SpectrumSource& source,
                        const TightenSchedule& sched = {});

}  // namespace dpplearn

#endif
