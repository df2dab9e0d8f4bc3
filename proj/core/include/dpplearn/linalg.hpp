#ifndef DPPLEARN_LINALG_HPP
#define DPPLEARN_LINALG_HPP

#include "dpplearn/types.hpp"

#include <optional>

namespace dpplearn::linalg {

struct LogDetResult {
  double value = 0.0;     // log det, -inf when the matrix is singular
  double jitter = 0.0;    // diagonal jitter that was needed (0 if none)
  int retries = 0;
  bool ok = true;
};

/// log det of a symmetric positive (semi-)definite matrix via Cholesky.
/// On factorization failure a jitter of 1e-10 * mean(diag) is added and
/// grown 10x per retry, at most three retries. The empty matrix has log det 0.
LogDetResult log_det_spd(const MatrixXd& a);

/// Eigenvalues of a symmetric matrix in non-increasing order.
VectorXd sym_eigenvalues_desc(const MatrixXd& a);

struct SymEigen {
  VectorXd values;   // non-increasing
  MatrixXd vectors;  // columns match `values`
};
SymEigen sym_eigen_desc(const MatrixXd& a);

/// Top-M eigenpairs of a symmetric PSD matrix by block subspace (power)
/// iteration with Rayleigh-Ritz extraction. Ritz values never exceed the
/// corresponding true eigenvalues. `warm` may carry a previous basis.
struct PartialEigen {
  VectorXd values;
  MatrixXd vectors;
  int iterations = 0;
  bool converged = false;
};
PartialEigen top_eigen_subspace(const MatrixXd& a, std::size_t m,
                                const MatrixXd* warm = nullptr,
                                double tol = 1e-12, int max_iter = 500);

/// Principal submatrix a[idx, idx].
MatrixXd principal_submatrix(const MatrixXd& a, const IndexSet& idx);

/// max |a - a^T| / max(|a|, tiny).
double asymmetry(const MatrixXd& a);

}  // namespace dpplearn::linalg

#endif
