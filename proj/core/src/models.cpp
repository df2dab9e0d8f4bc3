#include "dpplearn/likelihood.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dpplearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_theta(std::span<const double> theta, std::size_t expected) {
  if (theta.size() != expected) throw ConfigError("parameter vector has the wrong length");
}

MatrixXd squared_distances(const MatrixXd& f) {
  const VectorXd sq = f.rowwise().squaredNorm();
  MatrixXd d2 = (-2.0 * f * f.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  return d2;
}

}  // namespace

// ---- kernel families -------------------------------------------------------------

GaussianQualitySimilarityFamily::GaussianQualitySimilarityFamily(GroundSet ground)
    : ground_(std::move(ground)) {}

std::vector<std::string> GaussianQualitySimilarityFamily::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t d = 1; d <= ground_.dim(); ++d) names.push_back("gamma_" + std::to_string(d));
  for (std::size_t d = 1; d <= ground_.dim(); ++d) names.push_back("sigma_" + std::to_string(d));
  return names;
}

MatrixXd GaussianQualitySimilarityFamily::kernel(std::span<const double> theta) const {
  check_theta(theta, 2 * ground_.dim());
  DiscreteGaussianTheta t;
  t.gamma_diag.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(ground_.dim()));
  t.sigma_diag.assign(theta.begin() + static_cast<std::ptrdiff_t>(ground_.dim()), theta.end());
  return build_discrete_kernel(ground_, t).L;
}

std::vector<MatrixXd> GaussianQualitySimilarityFamily::kernel_derivatives(std::span<const double> theta) const {
  const MatrixXd L = kernel(theta);
  const std::size_t dim = ground_.dim();
  const auto& x = ground_.items();
  const auto n = x.rows();
  std::vector<MatrixXd> out;
  for (std::size_t l = 0; l < dim; ++l) {
    const auto c = static_cast<Eigen::Index>(l);
    const VectorXd sq = x.col(c).array().square();
    MatrixXd C(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) C(i, j) = L(i, j) * (sq(i) + sq(j)) / (2.0 * theta[l] * theta[l]);
    out.push_back(std::move(C));
  }
  for (std::size_t l = 0; l < dim; ++l) {
    const auto c = static_cast<Eigen::Index>(l);
    const double s = theta[dim + l];
    MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = x(i, c) - x(j, c);
        G(i, j) = L(i, j) * diff * diff / (2.0 * s * s);
      }
    out.push_back(std::move(G));
  }
  return out;
}

GaussianSimilarityFamily::GaussianSimilarityFamily(GroundSet ground) : ground_(std::move(ground)) {}

std::vector<std::string> GaussianSimilarityFamily::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t d = 1; d <= ground_.dim(); ++d) names.push_back("sigma_" + std::to_string(d));
  return names;
}

MatrixXd GaussianSimilarityFamily::kernel(std::span<const double> theta) const {
  check_theta(theta, ground_.dim());
  return build_gaussian_similarity_kernel(ground_, theta).L;
}

std::vector<MatrixXd> GaussianSimilarityFamily::kernel_derivatives(std::span<const double> theta) const {
  const MatrixXd L = kernel(theta);
  const auto& x = ground_.items();
  const auto n = x.rows();
  std::vector<MatrixXd> out;
  for (std::size_t l = 0; l < ground_.dim(); ++l) {
    const auto c = static_cast<Eigen::Index>(l);
    MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double diff = x(i, c) - x(j, c);
        G(i, j) = L(i, j) * diff * diff / (2.0 * theta[l] * theta[l]);
      }
    out.push_back(std::move(G));
  }
  return out;
}

PolynomialFamily::PolynomialFamily(GroundSet ground, bool check_psd)
    : ground_(std::move(ground)), gram_(ground_.items() * ground_.items().transpose()), check_psd_(check_psd) {}

MatrixXd PolynomialFamily::kernel(std::span<const double> theta) const {
  check_theta(theta, 2);
  if (check_psd_) return build_polynomial_kernel(ground_, PolynomialTheta{theta[0], theta[1]}).L;
  MatrixXd L = (gram_.array() + theta[0]).pow(theta[1]).matrix();
  return 0.5 * (L + L.transpose());
}

std::vector<MatrixXd> PolynomialFamily::kernel_derivatives(std::span<const double> theta) const {
  check_theta(theta, 2);
  const double p = theta[0];
  const double q = theta[1];
  const MatrixXd base = gram_.array() + p;
  const auto n = base.rows();
  MatrixXd R(n, n);
  MatrixXd U(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double b = base(i, j);
      const double l = std::pow(b, q);
      // R = q L^{(q-1)/q} = q b^{q-1};  U = L log(L^{1/q}) = L log b
      R(i, j) = q * std::pow(b, q - 1.0);
      U(i, j) = (b == 0.0) ? 0.0 : l * std::log(std::abs(b));
    }
  return {R, U};
}

FeatureFamily::FeatureFamily(FeatureSet features) : features_(std::move(features)) {
  features_.validate();
  ground_ = build_feature_kernel(features_, std::vector<double>(features_.num_blocks(), 1.0)).ground;
  for (const auto& b : features_.blocks) sq_dist_.push_back(squared_distances(b));
}

std::vector<std::string> FeatureFamily::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& b : features_.block_names) names.push_back("sigma_" + b);
  return names;
}

MatrixXd FeatureFamily::kernel(std::span<const double> theta) const {
  check_theta(theta, sq_dist_.size());
  for (double s : theta)
    if (!(s > 0.0)) throw ConfigError("feature sigma must be positive");
  const auto n = static_cast<Eigen::Index>(ground_.size());
  MatrixXd expo = MatrixXd::Zero(n, n);
  for (std::size_t b = 0; b < sq_dist_.size(); ++b) expo += sq_dist_[b] / theta[b];
  MatrixXd L = (-expo.array()).exp().matrix();
  L.diagonal().setOnes();
  return L;
}

std::vector<MatrixXd> FeatureFamily::kernel_derivatives(std::span<const double> theta) const {
  const MatrixXd L = kernel(theta);
  std::vector<MatrixXd> out;
  for (std::size_t b = 0; b < sq_dist_.size(); ++b)
    out.push_back(L.cwiseProduct(sq_dist_[b]) / (theta[b] * theta[b]));
  return out;
}

// ---- discrete model -----------------------------------------------------------

namespace {

struct GroupBoundState {
  double data_term = 0.0;
  double T = 0.0;
  std::unique_ptr<DiscreteSpectrum> spectrum;
  EigenTruncation trunc;
  NormalizerBounds nb;
};

class DiscreteLikelihoodBounds final : public LikelihoodBounds {
 public:
  DiscreteLikelihoodBounds(std::vector<GroupBoundState> groups, Process process, std::size_t k,
                           TightenSchedule sched, bool dead)
      : groups_(std::move(groups)), process_(process), k_(k), sched_(sched), dead_(dead) {
    if (!dead_)
      for (auto& g : groups_) refresh(g);
  }

  double lower() const override {
    if (dead_) return kNegInf;
    double s = 0.0;
    for (const auto& g : groups_) s += g.data_term - g.T * g.nb.log_upper;
    return s;
  }
  double upper() const override {
    if (dead_) return kNegInf;
    double s = 0.0;
    for (const auto& g : groups_) s += g.data_term - g.T * g.nb.log_lower;
    return s;
  }
  bool exact() const override {
    if (dead_) return true;
    return std::all_of(groups_.begin(), groups_.end(), [](const auto& g) { return g.trunc.exact; });
  }
  bool tighten() override {
    if (dead_) return false;
    bool progressed = false;
    for (auto& g : groups_) {
      if (g.trunc.exact) continue;
      EigenTruncation next = dpplearn::tighten(g.trunc, *g.spectrum, sched_);
      if (next.size() > g.trunc.size() || next.exact != g.trunc.exact) {
        g.trunc = std::move(next);
        refresh(g);
        progressed = true;
      }
    }
    return progressed;
  }
  std::size_t level() const override {
    std::size_t m = 0;
    for (const auto& g : groups_) m = std::max(m, g.trunc.size());
    return m;
  }

 private:
  void refresh(GroupBoundState& g) {
    g.nb = process_ == Process::Dpp ? dpp_log_normalizer_bounds(g.trunc)
                                    : kdpp_log_normalizer_bounds(g.trunc, k_);
  }

  std::vector<GroupBoundState> groups_;
  Process process_;
  std::size_t k_;
  TightenSchedule sched_;
  bool dead_;
};

}  // namespace

DiscreteModel::DiscreteModel(std::vector<DiscreteGroup> groups, Process process, std::size_t k)
    : groups_(std::move(groups)), process_(process), k_(k) {
  if (groups_.empty()) throw ConfigError("discrete model needs at least one ground set");
  const auto names = groups_.front().family->parameter_names();
  for (const auto& g : groups_) {
    if (!g.family) throw ConfigError("discrete group without kernel family");
    if (g.family->parameter_names() != names)
      throw ConfigError("all ground sets must share one parameterization");
    for (std::size_t t = 0; t < g.samples.size(); ++t) {
      for (auto i : g.samples[t])
        if (i >= g.family->ground().size())
          throw ConfigError("sample " + std::to_string(t) + " indexes outside its ground set");
      if (process_ == Process::KDpp && g.samples[t].size() != k_)
        throw ConfigError("sample " + std::to_string(t) + " has " + std::to_string(g.samples[t].size()) +
                          " items; the k-DPP expects k = " + std::to_string(k_));
    }
    if (process_ == Process::KDpp && k_ > g.family->ground().size())
      throw ConfigError("k exceeds the ground-set size");
  }
  if (process_ == Process::KDpp && k_ == 0) throw ConfigError("k-DPP requires k >= 1");
}

DiscreteModel::DiscreteModel(std::shared_ptr<const KernelFamily> family, std::vector<IndexSet> samples,
                             Process process, std::size_t k)
    : DiscreteModel(std::vector<DiscreteGroup>{DiscreteGroup{std::move(family), std::move(samples)}}, process, k) {}

std::vector<std::string> DiscreteModel::parameter_names() const {
  return groups_.front().family->parameter_names();
}

double DiscreteModel::log_likelihood(std::span<const double> theta) const {
  double s = 0.0;
  for (const auto& g : groups_) {
    const MatrixXd L = g.family->kernel(theta);
    const double v = process_ == Process::Dpp ? dpp_log_likelihood(L, g.samples)
                                              : kdpp_log_likelihood(L, g.samples, k_);
    if (v == kNegInf) return kNegInf;
    s += v;
  }
  return s;
}

std::unique_ptr<LikelihoodBounds> DiscreteModel::likelihood_bounds(std::span<const double> theta,
                                                                   const TightenSchedule& sched) const {
  std::vector<GroupBoundState> states;
  bool dead = false;
  for (const auto& g : groups_) {
    GroupBoundState st;
    MatrixXd L = g.family->kernel(theta);
    st.data_term = log_det_data_term(L, g.samples);
    st.T = static_cast<double>(g.samples.size());
    if (st.data_term == kNegInf) {
      dead = true;
      break;
    }
    st.spectrum = std::make_unique<DiscreteSpectrum>(std::move(L));
    st.trunc = initial_truncation(*st.spectrum, sched);
    states.push_back(std::move(st));
  }
  return std::make_unique<DiscreteLikelihoodBounds>(std::move(states), process_, k_, sched, dead);
}

// ---- continuous Gaussian model ------------------------------------------------------

namespace {

class ContinuousLikelihoodBounds final : public LikelihoodBounds {
 public:
  ContinuousLikelihoodBounds(double data_term, double T, GaussianTheta theta, Process process, std::size_t k,
                             TightenSchedule sched)
      : data_term_(data_term), T_(T), spectrum_(std::move(theta)), process_(process), k_(k), sched_(sched) {
    if (data_term_ != kNegInf) {
      trunc_ = initial_truncation(spectrum_, sched_);
      refresh();
    }
  }
  double lower() const override { return data_term_ == kNegInf ? kNegInf : data_term_ - T_ * nb_.log_upper; }
  double upper() const override { return data_term_ == kNegInf ? kNegInf : data_term_ - T_ * nb_.log_lower; }
  bool exact() const override { return data_term_ == kNegInf || nb_.log_upper == nb_.log_lower; }
  bool tighten() override {
    if (exact()) return false;
    EigenTruncation next = dpplearn::tighten(trunc_, spectrum_, sched_);
    if (next.size() <= trunc_.size()) return false;
    trunc_ = std::move(next);
    refresh();
    return true;
  }
  std::size_t level() const override { return trunc_.size(); }
  const NormalizerBounds& normalizer() const { return nb_; }

 private:
  void refresh() {
    nb_ = process_ == Process::Dpp ? dpp_log_normalizer_bounds(trunc_) : kdpp_log_normalizer_bounds(trunc_, k_);
  }

  double data_term_;
  double T_;
  GaussianOperatorSpectrum spectrum_;
  Process process_;
  std::size_t k_;
  TightenSchedule sched_;
  EigenTruncation trunc_;
  NormalizerBounds nb_;
};

}  // namespace

ContinuousGaussianModel::ContinuousGaussianModel(std::size_t dim, bool isotropic, std::vector<PointConfig> samples,
                                                 Process process, std::size_t k, std::optional<Box> domain)
    : dim_(dim), isotropic_(isotropic), samples_(std::move(samples)), process_(process), k_(k) {
  if (dim_ == 0) throw ConfigError("dimension must be positive");
  if (process_ == Process::KDpp && k_ == 0) throw ConfigError("k-DPP requires k >= 1");
  if (domain && (domain->lo.size() != dim_ || domain->hi.size() != dim_))
    throw ConfigError("domain box dimension does not match the model");
  for (std::size_t t = 0; t < samples_.size(); ++t) {
    const auto& s = samples_[t];
    if (!s.empty() && s.dim() != dim_)
      throw ConfigError("sample " + std::to_string(t) + " has the wrong dimension");
    if (!s.points.allFinite()) throw ConfigError("sample " + std::to_string(t) + " has non-finite coordinates");
    if (process_ == Process::KDpp && s.size() != k_)
      throw ConfigError("sample " + std::to_string(t) + " has " + std::to_string(s.size()) +
                        " points; the k-DPP expects k = " + std::to_string(k_));
    if (domain)
      for (Eigen::Index r = 0; r < s.points.rows(); ++r)
        for (std::size_t d = 0; d < dim_; ++d) {
          const double v = s.points(r, static_cast<Eigen::Index>(d));
          if (v < domain->lo[d] || v > domain->hi[d])
            throw ConfigError("sample " + std::to_string(t) + " has a point outside the declared domain");
        }
  }
}

std::vector<std::string> ContinuousGaussianModel::parameter_names() const {
  if (isotropic_) return {"alpha", "rho", "sigma"};
  std::vector<std::string> names{"alpha"};
  for (std::size_t d = 1; d <= dim_; ++d) names.push_back("rho_" + std::to_string(d));
  for (std::size_t d = 1; d <= dim_; ++d) names.push_back("sigma_" + std::to_string(d));
  return names;
}

GaussianTheta ContinuousGaussianModel::unpack(std::span<const double> theta) const {
  if (isotropic_) {
    check_theta(theta, 3);
    return GaussianTheta::isotropic(theta[0], theta[1], theta[2], dim_);
  }
  check_theta(theta, 1 + 2 * dim_);
  GaussianTheta t;
  t.alpha = theta[0];
  t.rho.assign(theta.begin() + 1, theta.begin() + 1 + static_cast<std::ptrdiff_t>(dim_));
  t.sigma.assign(theta.begin() + 1 + static_cast<std::ptrdiff_t>(dim_), theta.end());
  return t;
}

std::vector<double> ContinuousGaussianModel::pack(const GaussianTheta& theta) const {
  if (isotropic_) return {theta.alpha, theta.rho.at(0), theta.sigma.at(0)};
  std::vector<double> v{theta.alpha};
  v.insert(v.end(), theta.rho.begin(), theta.rho.end());
  v.insert(v.end(), theta.sigma.begin(), theta.sigma.end());
  return v;
}

double ContinuousGaussianModel::data_term(const GaussianTheta& theta) const {
  double total = 0.0;
  for (const auto& s : samples_) {
    if (s.empty()) continue;
    // Repeated points make L_A exactly singular.
    for (Eigen::Index i = 0; i < s.points.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j)
        if (s.points.row(i) == s.points.row(j)) return kNegInf;
    const linalg::LogDetResult r = linalg::log_det_spd(continuous_kernel_matrix(s.points, theta));
    if (!r.ok) return kNegInf;
    total += r.value;
  }
  return total;
}

double ContinuousGaussianModel::log_likelihood(std::span<const double> theta) const {
  if (process_ == Process::KDpp)
    throw ConfigError("continuous k-DPP normalizers are only available as bounds; use a bounded sampler");
  const GaussianTheta t = unpack(theta);
  t.validate();
  const double dt = data_term(t);
  if (dt == kNegInf) return kNegInf;
  const GaussianOperatorSpectrum spectrum(t);
  TightenSchedule sched;
  EigenTruncation trunc = initial_truncation(spectrum, sched);
  const double T = static_cast<double>(samples_.size());
  NormalizerBounds nb = dpp_log_normalizer_bounds(trunc);
  while (T * nb.width() > 1e-9) {
    EigenTruncation next = tighten(trunc, spectrum, sched);
    if (next.size() <= trunc.size()) break;
    trunc = std::move(next);
    nb = dpp_log_normalizer_bounds(trunc);
  }
  return dt - T * 0.5 * (nb.log_lower + nb.log_upper);
}

std::unique_ptr<LikelihoodBounds> ContinuousGaussianModel::likelihood_bounds(std::span<const double> theta,
                                                                             const TightenSchedule& sched) const {
  const GaussianTheta t = unpack(theta);
  t.validate();
  return std::make_unique<ContinuousLikelihoodBounds>(data_term(t), static_cast<double>(samples_.size()), t,
                                                      process_, k_, sched);
}

}  // namespace dpplearn
