#include "dpplearn/kernels.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace dpplearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x))
      throw ConfigError(std::string(what) + " must be strictly positive and finite");
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

// ---- types ------------------------------------------------------------------

GroundSet::GroundSet(MatrixXd items) : items_(std::move(items)) {
  if (items_.rows() == 0) throw ConfigError("ground set must contain at least one item");
  if (items_.cols() == 0) throw ConfigError("ground set items must have positive dimension");
  if (!items_.allFinite()) throw ConfigError("ground set contains non-finite coordinates");
}

PointConfig GroundSet::points(const IndexSet& idx) const {
  MatrixXd p(static_cast<Eigen::Index>(idx.size()), items_.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= size()) throw ConfigError("index out of range for ground set");
    p.row(static_cast<Eigen::Index>(r)) = items_.row(static_cast<Eigen::Index>(idx[r]));
  }
  return PointConfig(std::move(p));
}

IndexSet GroundSet::locate(const PointConfig& config, double tol) const {
  if (!config.empty() && config.dim() != dim())
    throw ConfigError("point dimension does not match ground set dimension");
  IndexSet out;
  out.reserve(config.size());
  for (Eigen::Index r = 0; r < config.points.rows(); ++r) {
    Eigen::Index best = -1;
    double best_d = tol;
    for (Eigen::Index i = 0; i < items_.rows(); ++i) {
      const double d = (items_.row(i) - config.points.row(r)).cwiseAbs().maxCoeff();
      if (d <= best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best < 0) {
      std::ostringstream os;
      os << "point " << r << " does not match any ground-set item";
      throw ConfigError(os.str());
    }
    out.push_back(static_cast<std::size_t>(best));
  }
  return out;
}

GroundSet lattice(const std::vector<std::size_t>& counts, double spacing,
                  const std::vector<double>& origin) {
  if (counts.empty() || counts.size() != origin.size())
    throw ConfigError("lattice counts and origin must have equal, positive length");
  std::size_t total = 1;
  for (auto c : counts) {
    if (c == 0) throw ConfigError("lattice counts must be positive");
    total *= c;
  }
  const auto dim = static_cast<Eigen::Index>(counts.size());
  MatrixXd items(static_cast<Eigen::Index>(total), dim);
  std::vector<std::size_t> idx(counts.size(), 0);
  for (std::size_t r = 0; r < total; ++r) {
    for (Eigen::Index d = 0; d < dim; ++d)
      items(static_cast<Eigen::Index>(r), d) =
          origin[static_cast<std::size_t>(d)] + spacing * static_cast<double>(idx[static_cast<std::size_t>(d)]);
    // last coordinate varies fastest
    for (std::size_t d = counts.size(); d-- > 0;) {
      if (++idx[d] < counts[d]) break;
      idx[d] = 0;
    }
  }
  return GroundSet(std::move(items));
}

GaussianTheta::GaussianTheta(double a, std::vector<double> r, std::vector<double> s)
    : alpha(a), rho(std::move(r)), sigma(std::move(s)) {}

GaussianTheta GaussianTheta::isotropic(double a, double r, double s, std::size_t dim) {
  return GaussianTheta(a, std::vector<double>(dim, r), std::vector<double>(dim, s));
}

double GaussianTheta::beta(std::size_t d) const { return std::pow(1.0 + 2.0 / gamma(d), 0.25); }

void GaussianTheta::validate() const {
  if (rho.empty() || rho.size() != sigma.size())
    throw ConfigError("rho and sigma must have the same positive length");
  const double a[] = {alpha};
  require_positive(a, "alpha");
  require_positive(rho, "rho");
  require_positive(sigma, "sigma");
}

void DiscreteGaussianTheta::validate() const {
  if (sigma_diag.empty() || gamma_diag.size() != sigma_diag.size())
    throw ConfigError("Gamma and Sigma diagonals must have the same positive length");
  require_positive(gamma_diag, "Gamma");
  require_positive(sigma_diag, "Sigma");
}

// ---- checks -----------------------------------------------------------------

KernelCheck check_kernel(const MatrixXd& L) {
  KernelCheck c;
  c.asymmetry = linalg::asymmetry(L);
  c.symmetric = c.asymmetry <= 1e-12;
  const MatrixXd sym = 0.5 * (L + L.transpose());
  const VectorXd ev = linalg::sym_eigenvalues_desc(sym);
  if (ev.size() > 0) {
    c.max_eigenvalue = ev(0);
    c.min_eigenvalue = ev(ev.size() - 1);
  }
  c.psd = c.min_eigenvalue >= -1e-8 * std::max(c.max_eigenvalue, 0.0);
  return c;
}

// ---- discrete kernels ---------------------------------------------------------

DiscreteKernel build_discrete_kernel(const GroundSet& ground, const DiscreteGaussianTheta& theta) {
  theta.validate();
  if (ground.dim() != theta.dim()) throw ConfigError("ground set dimension does not match theta");
  const auto n = static_cast<Eigen::Index>(ground.size());
  const auto& x = ground.items();
  const VectorXd inv_gamma = Eigen::Map<const VectorXd>(theta.gamma_diag.data(), x.cols()).cwiseInverse();
  const VectorXd inv_sigma = Eigen::Map<const VectorXd>(theta.sigma_diag.data(), x.cols()).cwiseInverse();
  VectorXd log_q(n);
  for (Eigen::Index i = 0; i < n; ++i)
    log_q(i) = -0.5 * (x.row(i).array().square() * inv_gamma.transpose().array()).sum();
  MatrixXd L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = std::exp(2.0 * log_q(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      const double quad = ((x.row(i) - x.row(j)).array().square() * inv_sigma.transpose().array()).sum();
      const double v = std::exp(log_q(i) + log_q(j) - 0.5 * quad);
      L(i, j) = v;
      L(j, i) = v;
    }
  }
  return {ground, std::move(L)};
}

DiscreteKernel build_gaussian_similarity_kernel(const GroundSet& ground,
                                                std::span<const double> sigma_diag) {
  require_positive(sigma_diag, "Sigma");
  if (ground.dim() != sigma_diag.size()) throw ConfigError("ground set dimension does not match Sigma");
  const auto n = static_cast<Eigen::Index>(ground.size());
  const auto& x = ground.items();
  const VectorXd inv_sigma = Eigen::Map<const VectorXd>(sigma_diag.data(), x.cols()).cwiseInverse();
  MatrixXd L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double quad = ((x.row(i) - x.row(j)).array().square() * inv_sigma.transpose().array()).sum();
      L(i, j) = L(j, i) = std::exp(-0.5 * quad);
    }
  }
  return {ground, std::move(L)};
}

DiscreteKernel build_polynomial_kernel(const GroundSet& ground, const PolynomialTheta& theta) {
  if (!(theta.q > 0.0)) throw ConfigError("polynomial exponent q must be positive");
  const MatrixXd gram = ground.items() * ground.items().transpose();
  MatrixXd L = gram.array() + theta.p;
  const bool integer_q = std::abs(theta.q - std::round(theta.q)) < 1e-15;
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    for (Eigen::Index j = 0; j < L.cols(); ++j) {
      const double base = L(i, j);
      if (base < 0.0 && !integer_q)
        throw NumericalError("x^T y + p is negative and q is not an integer; kernel undefined");
      L(i, j) = std::pow(base, theta.q);
    }
  L = 0.5 * (L + L.transpose());
  const KernelCheck c = check_kernel(L);
  if (!c.psd) {
    std::ostringstream os;
    os << "polynomial kernel is not PSD: most negative eigenvalue " << c.min_eigenvalue
       << " (largest " << c.max_eigenvalue << ")";
    throw NumericalError(os.str());
  }
  return {ground, std::move(L)};
}

void FeatureSet::validate() const {
  if (blocks.empty()) throw ConfigError("feature set has no blocks");
  if (block_names.size() != blocks.size()) throw ConfigError("feature block names do not match blocks");
  for (const auto& b : blocks) {
    if (b.rows() != blocks.front().rows())
      throw ConfigError("every feature block must describe every item");
    if (!b.allFinite()) throw ConfigError("feature vectors must be finite");
  }
  if (size() == 0) throw ConfigError("feature set has no items");
}

void FeatureSet::normalize_rows() {
  for (auto& b : blocks)
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      const double nrm = b.row(i).norm();
      if (nrm > 0.0) b.row(i) /= nrm;
    }
}

DiscreteKernel build_feature_kernel(const FeatureSet& features, std::span<const double> sigmas) {
  features.validate();
  if (sigmas.size() != features.num_blocks())
    throw ConfigError("need exactly one sigma per feature block");
  require_positive(sigmas, "feature sigma");
  const auto n = static_cast<Eigen::Index>(features.size());
  MatrixXd expo = MatrixXd::Zero(n, n);
  for (std::size_t b = 0; b < features.num_blocks(); ++b) {
    const MatrixXd& f = features.blocks[b];
    const VectorXd sq = f.rowwise().squaredNorm();
    MatrixXd d2 = (-2.0 * f * f.transpose()).colwise() + sq;
    d2.rowwise() += sq.transpose();
    expo += d2.cwiseMax(0.0) / sigmas[b];
  }
  MatrixXd L = (-expo.array()).exp().matrix();
  L = 0.5 * (L + L.transpose());
  L.diagonal().setOnes();
  // Concatenating the blocks gives a ground set of raw coordinates.
  Eigen::Index width = 0;
  for (const auto& b : features.blocks) width += b.cols();
  MatrixXd all(n, std::max<Eigen::Index>(width, 1));
  Eigen::Index c = 0;
  for (const auto& b : features.blocks) {
    all.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  if (width == 0) all.setZero();
  return {GroundSet(std::move(all)), std::move(L)};
}

// ---- continuous Gaussian kernel ---------------------------------------------

double gaussian_quality(std::span<const double> x, const GaussianTheta& theta) {
  double log_q2 = std::log(theta.alpha);
  for (std::size_t d = 0; d < theta.dim(); ++d)
    log_q2 += -x[d] * x[d] / theta.rho[d] - 0.5 * std::log(std::numbers::pi * theta.rho[d]);
  return std::exp(0.5 * log_q2);
}

double gaussian_similarity(std::span<const double> x, std::span<const double> y,
                           const GaussianTheta& theta) {
  double e = 0.0;
  for (std::size_t d = 0; d < theta.dim(); ++d) {
    const double diff = x[d] - y[d];
    e -= diff * diff / (2.0 * theta.sigma[d]);
  }
  return std::exp(e);
}

MatrixXd continuous_kernel_matrix(const MatrixXd& points, const GaussianTheta& theta) {
  const auto n = points.rows();
  const auto dim = points.cols();
  if (n > 0 && static_cast<std::size_t>(dim) != theta.dim())
    throw ConfigError("point dimension does not match theta");
  VectorXd log_q(n);
  double log_norm = 0.5 * std::log(theta.alpha);
  for (std::size_t d = 0; d < theta.dim(); ++d)
    log_norm -= 0.25 * std::log(std::numbers::pi * theta.rho[d]);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = log_norm;
    for (Eigen::Index d = 0; d < dim; ++d)
      s -= points(i, d) * points(i, d) / (2.0 * theta.rho[static_cast<std::size_t>(d)]);
    log_q(i) = s;
  }
  MatrixXd L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = std::exp(2.0 * log_q(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      double e = log_q(i) + log_q(j);
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = points(i, d) - points(j, d);
        e -= diff * diff / (2.0 * theta.sigma[static_cast<std::size_t>(d)]);
      }
      L(i, j) = L(j, i) = std::exp(e);
    }
  }
  return L;
}

namespace {

struct PerDim {
  std::vector<double> log_lead;   // log of the m_d = 1 factor
  std::vector<double> log_ratio;  // log of the per-step ratio (< 0)
};

PerDim per_dim_factors(const GaussianTheta& theta) {
  theta.validate();
  PerDim f;
  for (std::size_t d = 0; d < theta.dim(); ++d) {
    const double g = theta.gamma(d);
    const double b2 = std::sqrt(1.0 + 2.0 / g);  // beta^2
    f.log_lead.push_back(-0.5 * std::log(0.5 * (b2 + 1.0) + 0.5 / g));
    f.log_ratio.push_back(-std::log(g * (b2 + 1.0) + 1.0));
  }
  return f;
}

}  // namespace

double log_continuous_eigenvalue(const MultiIndex& m, const GaussianTheta& theta) {
  if (m.dim() != theta.dim()) throw ConfigError("multi-index dimension does not match theta");
  const PerDim f = per_dim_factors(theta);
  double s = std::log(theta.alpha);
  for (std::size_t d = 0; d < m.dim(); ++d) {
    if (m.m[d] < 1) throw ConfigError("multi-index entries must be >= 1");
    s += f.log_lead[d] + static_cast<double>(m.m[d] - 1) * f.log_ratio[d];
  }
  return s;
}

double continuous_eigenvalue(const MultiIndex& m, const GaussianTheta& theta) {
  return std::exp(log_continuous_eigenvalue(m, theta));
}

GaussianSpectrum enumerate_eigenvalues(const GaussianTheta& theta, std::size_t count) {
  if (count == 0) throw ConfigError("eigenvalue count must be at least 1");
  const PerDim f = per_dim_factors(theta);
  const std::size_t dim = theta.dim();
  GaussianSpectrum out;
  out.trace = theta.alpha;

  struct Node {
    double log_lambda;
    std::vector<int> m;
    std::size_t hi;  // children only increment coordinates >= hi
    bool operator<(const Node& o) const { return log_lambda < o.log_lambda; }
  };
  double log_root = std::log(theta.alpha);
  for (std::size_t d = 0; d < dim; ++d) log_root += f.log_lead[d];
  std::priority_queue<Node> frontier;
  frontier.push({log_root, std::vector<int>(dim, 1), 0});
  const double log_min = std::log(std::numeric_limits<double>::min());
  out.lambdas.reserve(count);
  out.indices.reserve(count);
  while (out.lambdas.size() < count && !frontier.empty()) {
    Node top = frontier.top();
    frontier.pop();
    if (top.log_lambda < log_min) {
      out.truncated = true;
      break;
    }
    out.lambdas.push_back(std::exp(top.log_lambda));
    out.indices.push_back(MultiIndex{top.m});
    for (std::size_t d = top.hi; d < dim; ++d) {
      Node child{top.log_lambda + f.log_ratio[d], top.m, d};
      ++child.m[d];
      frontier.push(std::move(child));
    }
  }
  return out;
}

double trace_gaussian(const GaussianTheta& theta) {
  theta.validate();
  return theta.alpha;
}

// ---- elementary symmetric polynomials ---------------------------------------

double ElementarySymmetric::value() const { return std::exp(log_value); }

namespace {

// Scaled linear-domain recursion; returns false if it overflowed or lost the
// value to underflow.
bool scaled_recursion(std::span<const double> lambdas, std::size_t k, std::vector<double>* log_e) {
  double scale = 0.0;
  for (double l : lambdas) scale = std::max(scale, l);
  log_e->assign(k + 1, kNegInf);
  (*log_e)[0] = 0.0;
  if (scale <= 0.0) return true;
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  std::size_t positives = 0;
  for (double l : lambdas) {
    if (l > 0.0) ++positives;
    const double s = l / scale;
    for (std::size_t j = std::min(k, positives); j >= 1; --j) e[j] += s * e[j - 1];
  }
  const double log_scale = std::log(scale);
  for (std::size_t j = 1; j <= k; ++j) {
    if (!std::isfinite(e[j])) return false;
    if (e[j] <= 0.0) {
      if (j <= positives) return false;
      continue;
    }
    (*log_e)[j] = std::log(e[j]) + static_cast<double>(j) * log_scale;
  }
  return true;
}

void log_recursion(std::span<const double> lambdas, std::size_t k, std::vector<double>* log_e) {
  log_e->assign(k + 1, kNegInf);
  (*log_e)[0] = 0.0;
  std::size_t seen = 0;
  for (double l : lambdas) {
    ++seen;
    if (!(l > 0.0)) continue;
    const double ll = std::log(l);
    for (std::size_t j = std::min(k, seen); j >= 1; --j)
      (*log_e)[j] = log_add((*log_e)[j], ll + (*log_e)[j - 1]);
  }
}

}  // namespace

std::vector<double> log_elementary_symmetric_all(std::span<const double> lambdas, std::size_t k) {
  for (double l : lambdas)
    if (l < 0.0 || !std::isfinite(l)) throw NumericalError("elementary symmetric polynomial needs nonnegative finite inputs");
  std::vector<double> log_e;
  const std::size_t kk = std::min(k, lambdas.size());
  if (!scaled_recursion(lambdas, kk, &log_e)) log_recursion(lambdas, kk, &log_e);
  log_e.resize(k + 1, kNegInf);
  return log_e;
}

ElementarySymmetric elementary_symmetric(std::span<const double> lambdas, std::size_t k) {
  ElementarySymmetric r;
  if (k > lambdas.size()) {
    r.k_exceeds_length = true;
    r.log_value = kNegInf;
    return r;
  }
  r.log_value = log_elementary_symmetric_all(lambdas, k)[k];
  return r;
}

}  // namespace dpplearn
