#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dpplearn::linalg {

namespace {

bool cholesky_log_det(const MatrixXd& a, double* out) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    s += std::log(d);
  }
  *out = 2.0 * s;
  return true;
}

}  // namespace

LogDetResult log_det_spd(const MatrixXd& a) {
  LogDetResult r;
  if (a.rows() == 0) return r;
  double v = 0.0;
  if (cholesky_log_det(a, &v)) {
    r.value = v;
    return r;
  }
  const double mean_diag = std::max(a.diagonal().mean(), std::numeric_limits<double>::min());
  double jitter = 1e-10 * mean_diag;
  for (int attempt = 1; attempt <= 3; ++attempt) {
    MatrixXd b = a;
    b.diagonal().array() += jitter;
    if (cholesky_log_det(b, &v)) {
      r.value = v;
      r.jitter = jitter;
      r.retries = attempt;
      return r;
    }
    jitter *= 10.0;
  }
  r.value = -std::numeric_limits<double>::infinity();
  r.ok = false;
  r.retries = 3;
  return r;
}

VectorXd sym_eigenvalues_desc(const MatrixXd& a) {
  if (a.rows() == 0) return VectorXd();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues().reverse();
}

SymEigen sym_eigen_desc(const MatrixXd& a) {
  SymEigen out;
  if (a.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

PartialEigen top_eigen_subspace(const MatrixXd& a, std::size_t m, const MatrixXd* warm,
                                double tol, int max_iter) {
  const Eigen::Index n = a.rows();
  const Eigen::Index want = std::min<Eigen::Index>(static_cast<Eigen::Index>(m), n);
  PartialEigen out;
  if (want == 0) {
    out.converged = true;
    return out;
  }
  // Oversampled block; convergence rate is lambda_{block+1} / lambda_want.
  const Eigen::Index block = std::min<Eigen::Index>(n, want + std::max<Eigen::Index>(8, want / 4));
  MatrixXd q(n, block);
  Eigen::Index filled = 0;
  if (warm != nullptr && warm->rows() == n) {
    filled = std::min<Eigen::Index>(warm->cols(), block);
    q.leftCols(filled) = warm->leftCols(filled);
  }
  std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(want));
  std::normal_distribution<double> normal;
  for (Eigen::Index j = filled; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) q(i, j) = normal(rng);

  Eigen::HouseholderQR<MatrixXd> qr(q);
  q = qr.householderQ() * MatrixXd::Identity(n, block);

  VectorXd prev = VectorXd::Constant(want, -1.0);
  const double scale = std::max(a.diagonal().sum(), std::numeric_limits<double>::min());
  for (int it = 1; it <= max_iter; ++it) {
    MatrixXd z = a * q;
    // Rayleigh-Ritz on span(z)
    Eigen::HouseholderQR<MatrixXd> qz(z);
    q = qz.householderQ() * MatrixXd::Identity(n, block);
    MatrixXd h = q.transpose() * a * q;
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    VectorXd vals = es.eigenvalues().reverse();
    MatrixXd vecs = es.eigenvectors().rowwise().reverse();
    q = q * vecs;
    out.iterations = it;
    const VectorXd head = vals.head(want);
    const double change = (head - prev).cwiseAbs().maxCoeff();
    prev = head;
    // Residual check on the wanted pairs.
    if (change <= tol * scale) {
      MatrixXd res = a * q.leftCols(want) - q.leftCols(want) * head.asDiagonal();
      if (res.colwise().norm().maxCoeff() <= std::sqrt(tol) * scale) {
        out.converged = true;
        break;
      }
    }
  }
  out.values = prev.cwiseMax(0.0);
  out.vectors = q.leftCols(want);
  return out;
}

MatrixXd principal_submatrix(const MatrixXd& a, const IndexSet& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  MatrixXd s(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      s(i, j) = a(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                  static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
  return s;
}

double asymmetry(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  const double denom = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / denom;
}

}  // namespace dpplearn::linalg
