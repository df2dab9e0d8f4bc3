#include "dpplearn/spectral.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpplearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double partial_sum(const std::vector<double>& v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace

double EigenTruncation::gap() const {
  if (exact) return 0.0;
  return std::max(0.0, trace - partial_sum(lambdas));
}

void EigenTruncation::validate() const {
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] < 0.0 || !std::isfinite(lambdas[i]))
      throw NumericalError("truncated eigenvalues must be nonnegative and finite");
    if (i > 0 && lambdas[i] > lambdas[i - 1])
      throw NumericalError("truncated eigenvalues must be non-increasing");
  }
  const double s = partial_sum(lambdas);
  if (s > trace + 1e-8 * std::abs(trace)) {
    std::ostringstream os;
    os << "inconsistent truncation: partial eigenvalue sum " << s << " exceeds trace " << trace;
    throw NumericalError(os.str());
  }
}

NormalizerBounds dpp_log_normalizer_bounds(const EigenTruncation& trunc) {
  trunc.validate();
  NormalizerBounds b;
  long double lower = 0.0L;
  for (double l : trunc.lambdas) lower += std::log1p(l);
  b.log_lower = static_cast<double>(lower);
  b.log_upper = b.log_lower + trunc.gap();
  b.M_used = trunc.size();
  return b;
}

NormalizerBounds kdpp_log_normalizer_bounds(const EigenTruncation& trunc, std::size_t k) {
  trunc.validate();
  NormalizerBounds b;
  b.M_used = trunc.size();
  const std::vector<double> log_e = log_elementary_symmetric_all(trunc.lambdas, k);
  b.log_lower = log_e[k];
  const double gap = trunc.gap();
  if (gap <= 0.0) {
    b.log_upper = b.log_lower;
    return b;
  }
  // sum_{j=0..k} gap^j / j! * e_{k-j}(lambda_{1:M})
  std::vector<double> terms;
  terms.reserve(k + 1);
  const double log_gap = std::log(gap);
  for (std::size_t j = 0; j <= k; ++j)
    terms.push_back(static_cast<double>(j) * log_gap - std::lgamma(static_cast<double>(j) + 1.0) + log_e[k - j]);
  b.log_upper = std::max(log_sum_exp(terms), b.log_lower);
  return b;
}

// ---- sources ------------------------------------------------------------------

DiscreteSpectrum::DiscreteSpectrum(MatrixXd L, std::size_t dense_threshold)
    : L_(std::move(L)), trace_(L_.trace()), dense_threshold_(dense_threshold) {}

EigenTruncation DiscreteSpectrum::top(std::size_t M) const {
  const auto n = static_cast<std::size_t>(L_.rows());
  EigenTruncation t;
  t.trace = trace_;
  t.source = SpectrumKind::Discrete;
  const std::size_t m = std::min(M, n);
  auto take_full = [&]() {
    if (!full_) full_ = linalg::sym_eigenvalues_desc(L_);
    for (std::size_t i = 0; i < m; ++i) t.lambdas.push_back(std::max(0.0, (*full_)(static_cast<Eigen::Index>(i))));
  };
  if (n <= dense_threshold_ || m == n || full_) {
    take_full();
  } else {
    linalg::PartialEigen pe = linalg::top_eigen_subspace(L_, m, warm_.size() > 0 ? &warm_ : nullptr);
    warm_ = pe.vectors;
    for (Eigen::Index i = 0; i < pe.values.size(); ++i) t.lambdas.push_back(std::max(0.0, pe.values(i)));
    std::sort(t.lambdas.begin(), t.lambdas.end(), std::greater<>());
  }
  t.exact = (m == n);
  // Roundoff can push the partial sum a hair past the trace.
  const double s = partial_sum(t.lambdas);
  if (s > trace_) t.trace = s;
  return t;
}

GaussianOperatorSpectrum::GaussianOperatorSpectrum(GaussianTheta theta) : theta_(std::move(theta)) {
  theta_.validate();
}

EigenTruncation GaussianOperatorSpectrum::top(std::size_t M) const {
  EigenTruncation t;
  t.source = SpectrumKind::Continuous;
  t.trace = theta_.alpha;
  if (M == 0) return t;
  GaussianSpectrum s = enumerate_eigenvalues(theta_, M);
  t.lambdas = std::move(s.lambdas);
  const double sum = partial_sum(t.lambdas);
  if (sum > t.trace) t.trace = sum;
  return t;
}

EigenTruncation initial_truncation(const SpectrumSource& source, const TightenSchedule& sched) {
  return source.top(std::min(sched.initial_M, sched.max_M));
}

EigenTruncation tighten(const EigenTruncation& trunc, const SpectrumSource& source,
                        const TightenSchedule& sched) {
  if (trunc.exact) return trunc;
  std::size_t next = std::max<std::size_t>(trunc.size() * 2, std::max<std::size_t>(sched.initial_M, 1));
  next = std::min(next, sched.max_M);
  if (auto n = source.size()) next = std::min(next, *n);
  if (next <= trunc.size()) return trunc;
  EigenTruncation t = source.top(next);
  // Continuous enumeration that hit underflow cannot grow further.
  if (t.size() <= trunc.size()) return trunc;
  return t;
}

}  // namespace dpplearn
