#ifndef DPPLEARN_LIKELIHOOD_HPP
#define DPPLEARN_LIKELIHOOD_HPP

#include "dpplearn/bounds.hpp"
#include "dpplearn/kernels.hpp"
#include "dpplearn/spectral.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpplearn {

// ---- exact likelihoods on a fixed kernel matrix -------------------------------

/// log det(L_A) for every sample; -inf (with a diagnostic in `why`) for a
/// sample that repeats an item or whose submatrix is singular.
double log_det_data_term(const MatrixXd& L, const std::vector<IndexSet>& data,
                         std::string* why = nullptr);

/// sum_t log det(L_{A^t}) - T log det(L + I).
double dpp_log_likelihood(const MatrixXd& L, const std::vector<IndexSet>& data);

/// sum_t log det(L_{A^t}) - T log e_k(lambda(L)). Throws ConfigError when a
/// sample does not have exactly k items.
double kdpp_log_likelihood(const MatrixXd& L, const std::vector<IndexSet>& data, std::size_t k);

/// log e_k(lambda(L)) computed from the full spectrum.
double kdpp_log_normalizer(const MatrixXd& L, std::size_t k);

// ---- priors -----------------------------------------------------------------

/// Inverse-gamma prior; log density up to the dropped normalizing constant.
struct InvGammaPrior {
  double shape = 0.001;
  double scale = 0.001;

  void validate() const;
  /// -(shape + 1) log x - scale / x, or -inf for x <= 0.
  double log_density(double x) const;
};

// ---- models -------------------------------------------------------------------

enum class Process { Dpp, KDpp };

/// Refinable bounds on a log-likelihood at one parameter value.
class LikelihoodBounds : public DensityBounds {};

/// A parametric likelihood over positive parameters.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<std::string> parameter_names() const = 0;
  std::size_t num_parameters() const { return parameter_names().size(); }
  /// Exact log-likelihood where one exists. Continuous DPP models return a
  /// value whose truncation error is below 1e-9 (or the cap).
  virtual double log_likelihood(std::span<const double> theta) const = 0;
  /// Bounds driven by eigenvalue truncation, starting at sched.initial_M.
  virtual std::unique_ptr<LikelihoodBounds> likelihood_bounds(std::span<const double> theta,
                                                              const TightenSchedule& sched) const = 0;
};

/// A discrete kernel parameterized by a vector of scalars, with analytic
/// derivatives dL/dtheta_j.
class KernelFamily {
 public:
  virtual ~KernelFamily() = default;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual const GroundSet& ground() const = 0;
  virtual MatrixXd kernel(std::span<const double> theta) const = 0;
  virtual std::vector<MatrixXd> kernel_derivatives(std::span<const double> theta) const = 0;
  std::size_t num_parameters() const { return parameter_names().size(); }
};

/// Gaussian quality and Gaussian similarity (diagonal Gamma, Sigma).
/// Parameters: gamma_1..gamma_D, sigma_1..sigma_D.
class GaussianQualitySimilarityFamily final : public KernelFamily {
 public:
  explicit GaussianQualitySimilarityFamily(GroundSet ground);
  std::vector<std::string> parameter_names() const override;
  const GroundSet& ground() const override { return ground_; }
  MatrixXd kernel(std::span<const double> theta) const override;
  /// C^{(ll)} for gamma_l, G^{(ll)} for sigma_l.
  std::vector<MatrixXd> kernel_derivatives(std::span<const double> theta) const override;

 private:
  GroundSet ground_;
};

/// Uniform quality, Gaussian similarity. Parameters: sigma_1..sigma_D.
class GaussianSimilarityFamily final : public KernelFamily {
 public:
  explicit GaussianSimilarityFamily(GroundSet ground);
  std::vector<std::string> parameter_names() const override;
  const GroundSet& ground() const override { return ground_; }
  MatrixXd kernel(std::span<const double> theta) const override;
  /// G^{(ll)}_ij = L_ij (x_i^l - x_j^l)^2 / (2 sigma_l^2).
  std::vector<MatrixXd> kernel_derivatives(std::span<const double> theta) const override;

 private:
  GroundSet ground_;
};

/// (x^T y + p)^q. Parameters: p, q.
class PolynomialFamily final : public KernelFamily {
 public:
  explicit PolynomialFamily(GroundSet ground, bool check_psd = true);
  std::vector<std::string> parameter_names() const override { return {"p", "q"}; }
  const GroundSet& ground() const override { return ground_; }
  MatrixXd kernel(std::span<const double> theta) const override;
  /// R = q L^{(q-1)/q} for p and U = L log(L^{1/q}) for q.
  std::vector<MatrixXd> kernel_derivatives(std::span<const double> theta) const override;

 private:
  GroundSet ground_;
  MatrixXd gram_;
  bool check_psd_;
};

/// exp(-sum_b ||f_i^b - f_j^b||^2 / sigma_b). Parameters: sigma_<block>.
class FeatureFamily final : public KernelFamily {
 public:
  explicit FeatureFamily(FeatureSet features);
  std::vector<std::string> parameter_names() const override;
  const GroundSet& ground() const override { return ground_; }
  MatrixXd kernel(std::span<const double> theta) const override;
  /// dL/dsigma_b = L .* D_b / sigma_b^2 with D_b the squared block distances.
  std::vector<MatrixXd> kernel_derivatives(std::span<const double> theta) const override;
  const FeatureSet& features() const { return features_; }

 private:
  FeatureSet features_;
  GroundSet ground_;
  std::vector<MatrixXd> sq_dist_;
};

/// One ground set with its kernel family and the samples observed on it.
struct DiscreteGroup {
  std::shared_ptr<const KernelFamily> family;
  std::vector<IndexSet> samples;
};

/// DPP or k-DPP over one or more ground sets sharing a parameter vector
/// (e.g. image subcategories sharing feature bandwidths).
class DiscreteModel final : public Model {
 public:
  DiscreteModel(std::vector<DiscreteGroup> groups, Process process, std::size_t k = 0);
  DiscreteModel(std::shared_ptr<const KernelFamily> family, std::vector<IndexSet> samples,
                Process process, std::size_t k = 0);

  std::vector<std::string> parameter_names() const override;
  double log_likelihood(std::span<const double> theta) const override;
  std::unique_ptr<LikelihoodBounds> likelihood_bounds(std::span<const double> theta,
                                                      const TightenSchedule& sched) const override;

  const std::vector<DiscreteGroup>& groups() const { return groups_; }
  Process process() const { return process_; }
  std::size_t k() const { return k_; }

 private:
  std::vector<DiscreteGroup> groups_;
  Process process_;
  std::size_t k_;
};

/// Continuous DPP / k-DPP with Gaussian quality and similarity.
/// Parameters: alpha, rho, sigma (isotropic) or alpha, rho_1..rho_D, sigma_1..sigma_D.
class ContinuousGaussianModel final : public Model {
 public:
  struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
  };

  ContinuousGaussianModel(std::size_t dim, bool isotropic, std::vector<PointConfig> samples,
                          Process process, std::size_t k = 0, std::optional<Box> domain = std::nullopt);

  std::vector<std::string> parameter_names() const override;
  /// DPP only; k-DPP likelihoods have no exact path and throw ConfigError.
  double log_likelihood(std::span<const double> theta) const override;
  std::unique_ptr<LikelihoodBounds> likelihood_bounds(std::span<const double> theta,
                                                      const TightenSchedule& sched) const override;

  GaussianTheta unpack(std::span<const double> theta) const;
  std::vector<double> pack(const GaussianTheta& theta) const;
  /// sum_t log det(L_{A^t}); -inf when a sample repeats a point.
  double data_term(const GaussianTheta& theta) const;

  std::size_t dim() const { return dim_; }
  bool isotropic() const { return isotropic_; }
  Process process() const { return process_; }
  std::size_t k() const { return k_; }
  const std::vector<PointConfig>& samples() const { return samples_; }

 private:
  std::size_t dim_;
  bool isotropic_;
  std::vector<PointConfig> samples_;
  Process process_;
  std::size_t k_;
};

// ---- posterior ----------------------------------------------------------------

struct LogPosteriorBounds {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t M_used = 0;
  bool exact = false;
};

/// Model plus one inverse-gamma prior per parameter. Sampler-facing
/// densities live on the log-parameter scale: z = log theta, with the
/// Jacobian sum_j z_j folded in.
class Posterior {
 public:
  Posterior(std::shared_ptr<const Model> model, std::vector<InvGammaPrior> priors);

  const Model& model() const { return *model_; }
  std::size_t dim() const { return priors_.size(); }
  const std::vector<InvGammaPrior>& priors() const { return priors_; }

  double log_prior(std::span<const double> theta) const;
  double log_posterior(std::span<const double> theta) const;
  /// Bounds at the given truncation schedule, tightened `steps` times.
  LogPosteriorBounds log_posterior_bounds(std::span<const double> theta, const TightenSchedule& sched,
                                          std::size_t steps = 0) const;

  double log_density_log_scale(std::span<const double> z) const;
  std::unique_ptr<DensityBounds> bounds_log_scale(std::span<const double> z,
                                                  const TightenSchedule& sched) const;

  LogDensity exact_target() const;
  BoundedLogDensity bounded_target(const TightenSchedule& sched) const;

 private:
  std::shared_ptr<const Model> model_;
  std::vector<InvGammaPrior> priors_;
};

}  // namespace dpplearn

#endif
