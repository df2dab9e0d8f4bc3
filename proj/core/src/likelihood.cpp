#include "dpplearn/likelihood.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpplearn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_det_data_term(const MatrixXd& L, const std::vector<IndexSet>& data, std::string* why) {
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    IndexSet sorted = data[t];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      if (why) *why = "sample " + std::to_string(t) + " repeats an item";
      return kNegInf;
    }
    for (auto i : sorted)
      if (i >= static_cast<std::size_t>(L.rows()))
        throw ConfigError("sample " + std::to_string(t) + " indexes outside the ground set");
    const linalg::LogDetResult r = linalg::log_det_spd(linalg::principal_submatrix(L, data[t]));
    if (!r.ok) {
      if (why) *why = "sample " + std::to_string(t) + " has a singular kernel submatrix";
      return kNegInf;
    }
    total += r.value;
  }
  return total;
}

double dpp_log_likelihood(const MatrixXd& L, const std::vector<IndexSet>& data) {
  const double data_term = log_det_data_term(L, data);
  if (data_term == kNegInf) return kNegInf;
  const DiscreteSpectrum spectrum(L);
  const NormalizerBounds nb = dpp_log_normalizer_bounds(spectrum.top(static_cast<std::size_t>(L.rows())));
  return data_term - static_cast<double>(data.size()) * nb.log_upper;
}

double kdpp_log_normalizer(const MatrixXd& L, std::size_t k) {
  if (k > static_cast<std::size_t>(L.rows())) throw ConfigError("k exceeds the ground-set size");
  const DiscreteSpectrum spectrum(L);
  return kdpp_log_normalizer_bounds(spectrum.top(static_cast<std::size_t>(L.rows())), k).log_upper;
}

double kdpp_log_likelihood(const MatrixXd& L, const std::vector<IndexSet>& data, std::size_t k) {
  for (std::size_t t = 0; t < data.size(); ++t)
    if (data[t].size() != k)
      throw ConfigError("sample " + std::to_string(t) + " has " + std::to_string(data[t].size()) +
                        " items; the k-DPP expects k = " + std::to_string(k));
  const double data_term = log_det_data_term(L, data);
  if (data_term == kNegInf) return kNegInf;
  return data_term - static_cast<double>(data.size()) * kdpp_log_normalizer(L, k);
}

// ---- priors -----------------------------------------------------------------

void InvGammaPrior::validate() const {
  if (!(shape > 0.0) || !(scale > 0.0)) throw ConfigError("inverse-gamma shape and scale must be positive");
}

double InvGammaPrior::log_density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  return -(shape + 1.0) * std::log(x) - scale / x;
}

// ---- posterior ----------------------------------------------------------------

Posterior::Posterior(std::shared_ptr<const Model> model, std::vector<InvGammaPrior> priors)
    : model_(std::move(model)), priors_(std::move(priors)) {
  if (!model_) throw ConfigError("posterior needs a model");
  if (priors_.size() != model_->num_parameters())
    throw ConfigError("every scalar parameter needs exactly one prior");
  for (const auto& p : priors_) p.validate();
}

double Posterior::log_prior(std::span<const double> theta) const {
  if (theta.size() != priors_.size()) throw ConfigError("parameter vector has the wrong length");
  double s = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double v = priors_[j].log_density(theta[j]);
    if (v == kNegInf) return kNegInf;
    s += v;
  }
  return s;
}

double Posterior::log_posterior(std::span<const double> theta) const {
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  return model_->log_likelihood(theta) + lp;
}

LogPosteriorBounds Posterior::log_posterior_bounds(std::span<const double> theta, const TightenSchedule& sched,
                                                   std::size_t steps) const {
  LogPosteriorBounds out;
  const double lp = log_prior(theta);
  if (lp == kNegInf) {
    out.lower = out.upper = kNegInf;
    out.exact = true;
    return out;
  }
  auto b = model_->likelihood_bounds(theta, sched);
  for (std::size_t s = 0; s < steps && b->tighten(); ++s) {
  }
  out.lower = b->lower() + lp;
  out.upper = b->upper() + lp;
  out.M_used = b->level();
  out.exact = b->exact();
  return out;
}

namespace {

std::vector<double> exp_vector(std::span<const double> z) {
  std::vector<double> theta(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) theta[j] = std::exp(z[j]);
  return theta;
}

double jacobian(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v;
  return s;
}

// Likelihood bounds shifted by the log prior and the log-scale Jacobian.
class ShiftedBounds final : public DensityBounds {
 public:
  ShiftedBounds(std::unique_ptr<LikelihoodBounds> inner, double log_prior, double jac)
      : inner_(std::move(inner)), log_prior_(log_prior), jac_(jac) {}
  double lower() const override { return inner_->lower() + log_prior_ + jac_; }
  double upper() const override { return inner_->upper() + log_prior_ + jac_; }
  bool exact() const override { return inner_->exact(); }
  bool tighten() override { return inner_->tighten(); }
  std::size_t level() const override { return inner_->level(); }

 private:
  std::unique_ptr<LikelihoodBounds> inner_;
  double log_prior_;
  double jac_;
};

}  // namespace

double Posterior::log_density_log_scale(std::span<const double> z) const {
  for (double v : z)
    if (!std::isfinite(v)) return kNegInf;
  const std::vector<double> theta = exp_vector(z);
  const double lp = log_prior(theta);
  if (lp == kNegInf) return kNegInf;
  const double ll = model_->log_likelihood(theta);
  if (ll == kNegInf) return kNegInf;
  return ll + lp + jacobian(z);
}

std::unique_ptr<DensityBounds> Posterior::bounds_log_scale(std::span<const double> z,
                                                           const TightenSchedule& sched) const {
  for (double v : z)
    if (!std::isfinite(v)) return std::make_unique<ExactBounds>(kNegInf);
  const std::vector<double> theta = exp_vector(z);
  const double lp = log_prior(theta);
  if (lp == kNegInf) return std::make_unique<ExactBounds>(kNegInf);
  auto inner = model_->likelihood_bounds(theta, sched);
  if (inner->upper() == kNegInf) return std::make_unique<ExactBounds>(kNegInf);
  return std::make_unique<ShiftedBounds>(std::move(inner), lp, jacobian(z));
}

LogDensity Posterior::exact_target() const {
  return [this](std::span<const double> z) { return log_density_log_scale(z); };
}

BoundedLogDensity Posterior::bounded_target(const TightenSchedule& sched) const {
  return [this, sched](std::span<const double> z) { return bounds_log_scale(z, sched); };
}

}  // namespace dpplearn
