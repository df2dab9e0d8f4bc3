#ifndef DPPLEARN_BOUNDS_HPP
#define DPPLEARN_BOUNDS_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>

namespace dpplearn {

/// Refinable interval [lower, upper] around an unnormalized log density at
/// one fixed point.
class DensityBounds {
 public:
  virtual ~DensityBounds() = default;
  virtual double lower() const = 0;
  virtual double upper() const = 0;
  virtual bool exact() const = 0;
  /// Narrow the interval. Returns false when no refinement is possible
  /// (already exact, or the truncation cap was reached).
  virtual bool tighten() = 0;
  /// Current truncation size (0 for exact evaluators).
  virtual std::size_t level() const { return 0; }
};

/// A point value that is already exact.
class ExactBounds final : public DensityBounds {
 public:
  explicit ExactBounds(double v) : v_(v) {}
  double lower() const override { return v_; }
  double upper() const override { return v_; }
  bool exact() const override { return true; }
  bool tighten() override { return false; }

 private:
  double v_;
};

using LogDensity = std::function<double(std::span<const double>)>;
using BoundedLogDensity = std::function<std::unique_ptr<DensityBounds>(std::span<const double>)>;

}  // namespace dpplearn

#endif
