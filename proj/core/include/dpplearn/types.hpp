#ifndef DPPLEARN_TYPES_HPP
#define DPPLEARN_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpplearn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error hierarchy. The CLI maps these onto exit codes 2, 3 and 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A bounded MCMC step whose decision could not be resolved before the
/// eigenvalue cap was reached.
class BoundedStepUnresolved : public Error {
 public:
  BoundedStepUnresolved(const std::string& what, double lower, double upper,
                        double threshold)
      : Error(what), lower_(lower), upper_(upper), threshold_(threshold) {}
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double threshold() const { return threshold_; }

 private:
  double lower_;
  double upper_;
  double threshold_;
};

/// One observed point set in R^D. Rows are points.
struct PointConfig {
  MatrixXd points;  // n x D

  PointConfig() = default;
  explicit PointConfig(std::size_t dim) : points(0, static_cast<Eigen::Index>(dim)) {}
  explicit PointConfig(MatrixXd p) : points(std::move(p)) {}

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  bool empty() const { return points.rows() == 0; }
};

/// Index subset of a discrete ground set.
using IndexSet = std::vector<std::size_t>;

/// Ordered discrete ground set; rows are item feature vectors.
class GroundSet {
 public:
  GroundSet() = default;
  explicit GroundSet(MatrixXd items);

  std::size_t size() const { return static_cast<std::size_t>(items_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(items_.cols()); }
  const MatrixXd& items() const { return items_; }
  auto item(std::size_t i) const { return items_.row(static_cast<Eigen::Index>(i)); }

  /// Coordinates of the indexed items as a point configuration.
  PointConfig points(const IndexSet& idx) const;

  /// Map each point of `config` onto the ground-set item with identical
  /// coordinates (within `tol` in max-norm). Throws ConfigError when a point
  /// has no match.
  IndexSet locate(const PointConfig& config, double tol = 1e-9) const;

 private:
  MatrixXd items_;
};

/// n_1 x ... x n_D lattice with unit (or given) spacing, first point at `origin`.
GroundSet lattice(const std::vector<std::size_t>& counts, double spacing,
                  const std::vector<double>& origin);

/// Continuous Gaussian quality/similarity parameters (alpha, rho_d, sigma_d).
struct GaussianTheta {
  double alpha = 1.0;
  std::vector<double> rho;
  std::vector<double> sigma;

  GaussianTheta() = default;
  GaussianTheta(double a, std::vector<double> r, std::vector<double> s);
  /// Isotropic parameters replicated over `dim` dimensions.
  static GaussianTheta isotropic(double a, double r, double s, std::size_t dim);

  std::size_t dim() const { return rho.size(); }
  double gamma(std::size_t d) const { return sigma[d] / rho[d]; }
  double beta(std::size_t d) const;
  void validate() const;
};

/// Diagonal quality (Gamma) and similarity (Sigma) matrices of the discrete
/// Gaussian kernel.
struct DiscreteGaussianTheta {
  std::vector<double> gamma_diag;
  std::vector<double> sigma_diag;

  std::size_t dim() const { return sigma_diag.size(); }
  void validate() const;
};

/// (x^T y + p)^q polynomial similarity with uniform quality.
struct PolynomialTheta {
  double p = 0.0;
  double q = 1.0;
};

/// Multi-index into the tensor-product Gaussian eigenvalues; entries >= 1.
struct MultiIndex {
  std::vector<int> m;

  std::size_t dim() const { return m.size(); }
  bool operator==(const MultiIndex&) const = default;
};

}  // namespace dpplearn

#endif
