#include "dpplearn/moments.hpp"

#include "dpplearn/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dpplearn {

namespace {

double int_pow(double x, int m) {
  double r = 1.0;
  for (int i = 0; i < m; ++i) r *= x;
  return r;
}

std::vector<double> natural_row(const mcmc::Chain& chain, std::size_t i, bool log_scale) {
  std::vector<double> theta(chain.dim());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double v = chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    theta[j] = log_scale ? std::exp(v) : v;
  }
  return theta;
}

std::vector<std::size_t> retained_rows(const mcmc::Chain& chain, const MomentCheckOptions& opt) {
  if (chain.size() == 0) throw ConfigError("moment check needs a non-empty chain");
  std::vector<std::size_t> rows;
  const std::size_t thin = opt.thin == 0 ? 1 : opt.thin;
  for (std::size_t i = opt.burnin; i < chain.size(); i += thin) rows.push_back(i);
  if (rows.empty()) throw ConfigError("burn-in discards every chain row");
  return rows;
}

// theory[s][o][d]: theoretical moment of order o, coordinate d, under posterior sample s.
std::vector<MomentReport> summarize(const std::vector<std::vector<std::vector<double>>>& theory,
                                    const std::vector<int>& orders, const std::vector<EmpiricalMoment>& emp,
                                    std::size_t dim) {
  std::vector<MomentReport> out;
  for (std::size_t o = 0; o < orders.size(); ++o) {
    const std::size_t dims = orders[o] == 0 ? 1 : dim;
    for (std::size_t d = 0; d < dims; ++d) {
      std::vector<double> vals;
      vals.reserve(theory.size());
      double mean = 0.0;
      for (const auto& s : theory) {
        vals.push_back(s[o][d]);
        mean += s[o][d];
      }
      mean /= static_cast<double>(vals.size());
      MomentReport r;
      r.order = orders[o];
      r.dim = d;
      r.theoretical_mean = mean;
      r.band_lo = mcmc::quantile(vals, 0.025);
      r.band_hi = mcmc::quantile(vals, 0.975);
      r.empirical = emp[o].mean[d];
      r.empirical_se = emp[o].se[d];
      r.discrepancy = r.empirical - mean;
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

MatrixXd marginal_kernel(const MatrixXd& L) {
  const auto n = L.rows();
  if (L.cols() != n) throw ConfigError("kernel must be square");
  const MatrixXd I = MatrixXd::Identity(n, n);
  Eigen::LLT<MatrixXd> llt(L + I);
  if (llt.info() != Eigen::Success) throw NumericalError("I + L is not positive definite");
  MatrixXd K = I - llt.solve(I);
  return 0.5 * (K + K.transpose());
}

VectorXd discrete_moment(const GroundSet& ground, const MatrixXd& K, int m) {
  if (m < 0) throw ConfigError("moment order must be non-negative");
  if (static_cast<std::size_t>(K.rows()) != ground.size()) throw ConfigError("kernel does not match the ground set");
  const auto& x = ground.items();
  VectorXd out = VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index d = 0; d < x.cols(); ++d) out(d) += int_pow(x(i, d), m) * K(i, i);
  return out;
}

VectorXd discrete_moment(const DiscreteKernel& kernel, int m) {
  return discrete_moment(kernel.ground, marginal_kernel(kernel.L), m);
}

std::vector<MomentValues> continuous_gaussian_moments(const GaussianTheta& theta, const std::vector<int>& orders,
                                                      std::size_t M) {
  theta.validate();
  for (int o : orders) {
    if (o < 0) throw ConfigError("moment order must be non-negative");
    if (o % 2 == 0 && o > 4) throw ConfigError("closed-form continuous moments exist only for orders 0, 2 and 4");
  }
  const double tol = 1e-6 * theta.alpha;
  GaussianSpectrum spec;
  if (M == 0) {
    for (std::size_t m = 64;; m *= 2) {
      spec = enumerate_eigenvalues(theta, m);
      double sum = 0.0;
      for (double l : spec.lambdas) sum += l;
      if (theta.alpha - sum < tol || spec.truncated || m >= (std::size_t{1} << 22)) break;
    }
  } else {
    spec = enumerate_eigenvalues(theta, M);
  }
  double sum = 0.0;
  for (double l : spec.lambdas) sum += l;
  const double gap = theta.alpha - sum;
  if (gap >= tol) {
    std::ostringstream os;
    os << "truncation at M = " << spec.lambdas.size() << " leaves trace gap " << gap
       << ", above the required " << tol;
    throw NumericalError(os.str());
  }

  const std::size_t D = theta.dim();
  std::vector<MomentValues> out;
  for (int o : orders) {
    MomentValues mv;
    mv.order = o;
    mv.per_dim.assign(D, 0.0);
    if (o % 2 == 1) {
      out.push_back(mv);
      continue;
    }
    for (std::size_t i = 0; i < spec.lambdas.size(); ++i) {
      const double w = spec.lambdas[i] / (1.0 + spec.lambdas[i]);
      for (std::size_t d = 0; d < D; ++d) {
        const double n = spec.indices[i].m[d];
        const double s2 = theta.rho[d] / (2.0 * theta.beta(d) * theta.beta(d));
        double f = 1.0;
        if (o == 2) f = s2 * (2.0 * n - 1.0);
        if (o == 4) f = s2 * s2 * 3.0 * (2.0 * n * n - 2.0 * n + 1.0);
        mv.per_dim[d] += w * f;
      }
    }
    out.push_back(mv);
  }
  return out;
}

EmpiricalMoment empirical_moment(const std::vector<PointConfig>& samples, std::size_t dim, int m) {
  if (samples.empty()) throw ConfigError("empirical moments need at least one sample");
  const auto T = static_cast<double>(samples.size());
  EmpiricalMoment e;
  e.mean.assign(dim, 0.0);
  e.se.assign(dim, 0.0);
  std::vector<double> sq(dim, 0.0);
  for (const auto& s : samples) {
    for (std::size_t d = 0; d < dim; ++d) {
      double v = 0.0;
      for (Eigen::Index i = 0; i < s.points.rows(); ++i)
        v += int_pow(s.points(i, static_cast<Eigen::Index>(d)), m);
      e.mean[d] += v;
      sq[d] += v * v;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    e.mean[d] /= T;
    if (samples.size() > 1) {
      const double var = std::max(0.0, (sq[d] - T * e.mean[d] * e.mean[d]) / (T - 1.0));
      e.se[d] = std::sqrt(var / T);
    }
  }
  return e;
}

std::vector<MomentReport> moment_check(const mcmc::Chain& chain, const std::vector<PointConfig>& data,
                                       const ContinuousGaussianModel& model, const MomentCheckOptions& options) {
  const auto rows = retained_rows(chain, options);
  if (chain.dim() != model.num_parameters()) throw ConfigError("chain does not match the model parameters");
  const std::size_t D = model.dim();
  std::vector<std::vector<std::vector<double>>> theory;
  for (auto i : rows) {
    const GaussianTheta t = model.unpack(natural_row(chain, i, options.log_scale));
    const auto mv = continuous_gaussian_moments(t, options.orders);
    std::vector<std::vector<double>> per_order;
    for (const auto& v : mv) per_order.push_back(v.per_dim);
    theory.push_back(std::move(per_order));
  }
  std::vector<EmpiricalMoment> emp;
  for (int o : options.orders) emp.push_back(empirical_moment(data, D, o));
  return summarize(theory, options.orders, emp, D);
}

std::vector<MomentReport> moment_check(const mcmc::Chain& chain, const std::vector<IndexSet>& data,
                                       const KernelFamily& family, const MomentCheckOptions& options) {
  const auto rows = retained_rows(chain, options);
  if (chain.dim() != family.num_parameters()) throw ConfigError("chain does not match the model parameters");
  const GroundSet& ground = family.ground();
  const std::size_t D = ground.dim();
  std::vector<std::vector<std::vector<double>>> theory;
  for (auto i : rows) {
    const MatrixXd K = marginal_kernel(family.kernel(natural_row(chain, i, options.log_scale)));
    std::vector<std::vector<double>> per_order;
    for (int o : options.orders) {
      const VectorXd v = discrete_moment(ground, K, o);
      per_order.emplace_back(v.data(), v.data() + v.size());
    }
    theory.push_back(std::move(per_order));
  }
  std::vector<PointConfig> configs;
  for (const auto& A : data) configs.push_back(ground.points(A));
  std::vector<EmpiricalMoment> emp;
  for (int o : options.orders) emp.push_back(empirical_moment(configs, D, o));
  return summarize(theory, options.orders, emp, D);
}

MomentMatch moment_match_grid(const std::vector<std::vector<double>>& axes,
                              const std::function<std::vector<double>(std::span<const double>)>& theoretical,
                              const std::vector<double>& target) {
  if (axes.empty() || axes.size() > 2) throw ConfigError("moment matching searches over one or two parameters");
  for (const auto& a : axes)
    if (a.empty()) throw ConfigError("moment matching axis is empty");
  MomentMatch best;
  best.loss = std::numeric_limits<double>::infinity();
  const std::size_t n1 = axes.size() == 2 ? axes[1].size() : 1;
  std::vector<double> theta(axes.size());
  for (double a : axes[0])
    for (std::size_t j = 0; j < n1; ++j) {
      theta[0] = a;
      if (axes.size() == 2) theta[1] = axes[1][j];
      const std::vector<double> m = theoretical(theta);
      if (m.size() != target.size()) throw ConfigError("moment function returned the wrong number of values");
      double loss = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double scale = std::max(std::abs(target[i]), 1e-12);
        loss += (m[i] - target[i]) * (m[i] - target[i]) / (scale * scale);
      }
      if (loss < best.loss) {
        best.loss = loss;
        best.theta = theta;
      }
    }
  return best;
}

}  // namespace dpplearn
