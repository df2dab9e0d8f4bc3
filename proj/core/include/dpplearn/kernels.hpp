#ifndef DPPLEARN_KERNELS_HPP
#define DPPLEARN_KERNELS_HPP

#include "dpplearn/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace dpplearn {

/// Ground set plus a dense symmetric PSD kernel matrix over it.
struct DiscreteKernel {
  GroundSet ground;
  MatrixXd L;

  std::size_t size() const { return static_cast<std::size_t>(L.rows()); }
  double trace() const { return L.trace(); }
};

struct KernelCheck {
  double asymmetry = 0.0;     // relative
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool symmetric = true;
  bool psd = true;
};

/// Symmetry within 1e-12 relative and min eigenvalue >= -1e-8 * max.
/// Costs a full eigensolve.
KernelCheck check_kernel(const MatrixXd& L);

// ---- discrete kernels -----------------------------------------------------

/// L_ij = q(x_i) k(x_i, x_j) q(x_j) with
/// q(x) = exp(-x^T Gamma^{-1} x / 2), k(x, y) = exp(-(x-y)^T Sigma^{-1} (x-y) / 2).
DiscreteKernel build_discrete_kernel(const GroundSet& ground, const DiscreteGaussianTheta& theta);

/// Uniform quality, Gaussian similarity: L_ij = exp(-(x_i-x_j)^T Sigma^{-1} (x_i-x_j) / 2).
DiscreteKernel build_gaussian_similarity_kernel(const GroundSet& ground,
                                                std::span<const double> sigma_diag);

/// L_ij = (x_i^T x_j + p)^q. Throws NumericalError if the result is not
/// numerically PSD, naming the most negative eigenvalue.
DiscreteKernel build_polynomial_kernel(const GroundSet& ground, const PolynomialTheta& theta);

/// Items described by several named feature blocks (e.g. color, SIFT, GIST).
struct FeatureSet {
  std::vector<std::string> block_names;
  std::vector<MatrixXd> blocks;  // one N x K_b matrix per block

  std::size_t size() const { return blocks.empty() ? 0 : static_cast<std::size_t>(blocks.front().rows()); }
  std::size_t num_blocks() const { return blocks.size(); }
  void validate() const;
  /// Scale every item vector in every block to unit L2 norm (zero vectors stay zero).
  void normalize_rows();
};

/// L_ij = exp(-sum_b ||f_i^b - f_j^b||^2 / sigma_b).
DiscreteKernel build_feature_kernel(const FeatureSet& features, std::span<const double> sigmas);

// ---- continuous Gaussian kernel --------------------------------------------

/// Quality q(x) with q(x)^2 = alpha * prod_d exp(-x_d^2 / rho_d) / sqrt(pi rho_d),
/// i.e. alpha times a normalized density, so that tr(L) = alpha.
double gaussian_quality(std::span<const double> x, const GaussianTheta& theta);
double gaussian_similarity(std::span<const double> x, std::span<const double> y,
                           const GaussianTheta& theta);
/// Kernel matrix of the continuous operator restricted to the given points.
MatrixXd continuous_kernel_matrix(const MatrixXd& points, const GaussianTheta& theta);

double continuous_eigenvalue(const MultiIndex& m, const GaussianTheta& theta);
double log_continuous_eigenvalue(const MultiIndex& m, const GaussianTheta& theta);

/// Top eigenvalues of the Gaussian operator, largest first, with their
/// multi-indices. `truncated` is set when enumeration stopped at double
/// underflow before reaching the requested count.
struct GaussianSpectrum {
  std::vector<double> lambdas;
  std::vector<MultiIndex> indices;
  double trace = 0.0;
  bool truncated = false;
};
GaussianSpectrum enumerate_eigenvalues(const GaussianTheta& theta, std::size_t count);

/// tr(L) of the continuous Gaussian operator; equals alpha.
double trace_gaussian(const GaussianTheta& theta);

// ---- elementary symmetric polynomials ---------------------------------------

struct ElementarySymmetric {
  double log_value = 0.0;  // -inf when the value is zero
  bool k_exceeds_length = false;
  double value() const;
};

/// e_k(lambdas) via the O(Nk) recursion, evaluated on lambdas rescaled by
/// their maximum so that alpha ~ 1e3 spectra do not overflow.
ElementarySymmetric elementary_symmetric(std::span<const double> lambdas, std::size_t k);

/// log e_0 .. log e_k of the same spectrum (index j holds log e_j).
std::vector<double> log_elementary_symmetric_all(std::span<const double> lambdas, std::size_t k);

}  // namespace dpplearn

#endif
