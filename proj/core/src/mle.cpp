#include "dpplearn/mle.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpplearn::mle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxKdppGradientN = 200;

// tr(A B) for symmetric A, B.
double trace_product(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

// d log e_k / d lambda_n = e_{k-1}(lambda without n) / e_k(lambda).
VectorXd log_ek_sensitivities(const VectorXd& lambdas, std::size_t k) {
  const auto n = static_cast<std::size_t>(lambdas.size());
  const std::vector<double> all(lambdas.data(), lambdas.data() + n);
  const double log_ek = log_elementary_symmetric_all(all, k)[k];
  VectorXd w(static_cast<Eigen::Index>(n));
  std::vector<double> rest(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rest[r++] = all[j];
    const double log_ekm1 = log_elementary_symmetric_all(rest, k - 1)[k - 1];
    w(static_cast<Eigen::Index>(i)) = std::exp(log_ekm1 - log_ek);
  }
  return w;
}

double group_objective(const MatrixXd& L, const std::vector<IndexSet>& samples, Process process, std::size_t k) {
  return process == Process::Dpp ? dpp_log_likelihood(L, samples) : kdpp_log_likelihood(L, samples, k);
}

double total_objective(const std::vector<DiscreteGroup>& groups, std::span<const double> theta, Process process,
                       std::size_t k) {
  double s = 0.0;
  for (const auto& g : groups) {
    const double v = group_objective(g.family->kernel(theta), g.samples, process, k);
    if (v == kNegInf) return kNegInf;
    s += v;
  }
  return s;
}

}  // namespace

GradReport grad_log_likelihood(const std::vector<DiscreteGroup>& groups, std::span<const double> theta,
                               Process process, std::size_t k) {
  if (groups.empty()) throw ConfigError("gradient needs at least one ground set");
  GradReport rep;
  rep.names = groups.front().family->parameter_names();
  if (theta.size() != rep.names.size()) throw ConfigError("parameter vector has the wrong length");
  rep.gradient.assign(theta.size(), 0.0);

  for (const auto& g : groups) {
    const MatrixXd L = g.family->kernel(theta);
    const std::vector<MatrixXd> dL = g.family->kernel_derivatives(theta);
    const auto n = L.rows();
    const auto T = static_cast<double>(g.samples.size());

    for (std::size_t t = 0; t < g.samples.size(); ++t) {
      const IndexSet& A = g.samples[t];
      if (A.empty()) continue;
      const MatrixXd LA = linalg::principal_submatrix(L, A);
      Eigen::LLT<MatrixXd> llt(LA);
      if (llt.info() != Eigen::Success)
        throw NumericalError("kernel submatrix of sample " + std::to_string(t) + " is singular");
      const MatrixXd inv = llt.solve(MatrixXd::Identity(LA.rows(), LA.cols()));
      for (std::size_t j = 0; j < dL.size(); ++j)
        rep.gradient[j] += trace_product(inv, linalg::principal_submatrix(dL[j], A));
    }

    if (process == Process::Dpp) {
      const MatrixXd lpi = L + MatrixXd::Identity(n, n);
      Eigen::LLT<MatrixXd> llt(lpi);
      if (llt.info() != Eigen::Success) throw NumericalError("L + I is not positive definite");
      const MatrixXd inv = llt.solve(MatrixXd::Identity(n, n));
      for (std::size_t j = 0; j < dL.size(); ++j) rep.gradient[j] -= T * trace_product(inv, dL[j]);
    } else {
      if (static_cast<std::size_t>(n) > kMaxKdppGradientN)
        throw ConfigError("k-DPP gradients are limited to ground sets of at most 200 items");
      if (k == 0 || k > static_cast<std::size_t>(n)) throw ConfigError("k must lie in 1..N");
      const linalg::SymEigen eig = linalg::sym_eigen_desc(L);
      const VectorXd lambdas = eig.values.cwiseMax(0.0);
      const VectorXd w = log_ek_sensitivities(lambdas, k);
      // d log e_k = sum_n w_n v_n^T dL v_n = tr(V diag(w) V^T dL).
      const MatrixXd S = eig.vectors * w.asDiagonal() * eig.vectors.transpose();
      for (std::size_t j = 0; j < dL.size(); ++j) rep.gradient[j] -= T * trace_product(S, dL[j]);
    }
    rep.objective += group_objective(L, g.samples, process, k);
  }
  return rep;
}

GradReport grad_log_likelihood(const KernelFamily& family, std::span<const double> theta,
                               const std::vector<IndexSet>& data, Process process, std::size_t k) {
  // Non-owning handle; the group does not outlive this call.
  std::shared_ptr<const KernelFamily> handle(&family, [](const KernelFamily*) {});
  return grad_log_likelihood(std::vector<DiscreteGroup>{DiscreteGroup{handle, data}}, theta, process, k);
}

std::vector<double> finite_difference_gradient(const std::vector<DiscreteGroup>& groups,
                                               std::span<const double> theta, Process process, std::size_t k,
                                               double h) {
  std::vector<double> x(theta.begin(), theta.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    const double orig = x[j];
    x[j] = orig + step;
    const double fp = total_objective(groups, x, process, k);
    x[j] = orig - step;
    const double fm = total_objective(groups, x, process, k);
    x[j] = orig;
    g[j] = (fp - fm) / (2.0 * step);
  }
  return g;
}

AscentResult gradient_ascent(const std::vector<DiscreteGroup>& groups, std::vector<double> theta0,
                             const AscentOptions& options, Process process, std::size_t k) {
  if (!(options.step > 0.0)) throw ConfigError("step size must be positive");
  for (double v : theta0)
    if (!(v > 0.0)) throw ConfigError("starting parameters must be positive");

  auto log_scale_gradient = [&](const std::vector<double>& theta, double& objective) {
    const GradReport rep = grad_log_likelihood(groups, theta, process, k);
    objective = rep.objective;
    std::vector<double> gz(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) gz[j] = theta[j] * rep.gradient[j];
    return gz;
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  AscentResult res;
  std::vector<double> theta = std::move(theta0);
  double f = 0.0;
  std::vector<double> gz = log_scale_gradient(theta, f);
  if (!std::isfinite(f)) throw NumericalError("objective is not finite at the starting point");
  res.trace.push_back({theta, f, norm(gz), 0.0});

  std::vector<double> cand(theta.size());
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const double gn = norm(gz);
    if (gn < options.tolerance) {
      res.converged = true;
      res.stop_reason = "gradient norm below tolerance";
      break;
    }
    double eta = options.step;
    bool improved = false;
    double fc = kNegInf;
    for (int h = 0; h <= options.max_halvings; ++h, eta *= 0.5) {
      for (std::size_t j = 0; j < theta.size(); ++j) cand[j] = std::exp(std::log(theta[j]) + eta * gz[j]);
      fc = total_objective(groups, cand, process, k);
      if (std::isfinite(fc) && fc >= f) {
        improved = true;
        break;
      }
    }
    if (!improved) {
      res.stop_reason = "no ascent step found after " + std::to_string(options.max_halvings) + " halvings";
      break;
    }
    theta = cand;
    gz = log_scale_gradient(theta, f);
    res.iterations = it + 1;
    res.trace.push_back({theta, f, norm(gz), eta});
  }
  if (res.stop_reason.empty()) {
    if (norm(gz) < options.tolerance) {
      res.converged = true;
      res.stop_reason = "gradient norm below tolerance";
    } else {
      res.stop_reason = "iteration cap reached";
    }
  }
  res.theta = theta;
  res.objective = f;
  res.grad_norm = norm(gz);
  return res;
}

}  // namespace dpplearn::mle
