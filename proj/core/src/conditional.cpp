#include "dpplearn/conditional.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpplearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MatrixXd checked_inverse(const MatrixXd& m, const char* what) {
  const Eigen::PartialPivLU<MatrixXd> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream os;
    os << what << " is singular (reciprocal condition number " << rcond << ")";
    throw NumericalError(os.str());
  }
  return lu.inverse();
}

void check_subset(std::size_t n, const IndexSet& A, const char* name) {
  IndexSet s = A;
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw ConfigError(std::string(name) + " repeats an item");
  for (auto i : s)
    if (i >= n) throw ConfigError(std::string(name) + " indexes outside the ground set");
}

std::size_t position(const IndexSet& comp, std::size_t item) {
  const auto it = std::lower_bound(comp.begin(), comp.end(), item);
  return static_cast<std::size_t>(it - comp.begin());
}

class ExactLikelihood final : public LikelihoodBounds {
 public:
  explicit ExactLikelihood(double v) : v_(v) {}
  double lower() const override { return v_; }
  double upper() const override { return v_; }
  bool exact() const override { return true; }
  bool tighten() override { return false; }

 private:
  double v_;
};

}  // namespace

IndexSet complement(std::size_t n, const IndexSet& A) {
  std::vector<char> in(n, 0);
  for (auto i : A) {
    if (i >= n) throw ConfigError("index set refers outside the ground set");
    in[i] = 1;
  }
  IndexSet out;
  for (std::size_t i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

MatrixXd conditional_kernel(const MatrixXd& L, const IndexSet& A) {
  const auto n = static_cast<std::size_t>(L.rows());
  check_subset(n, A, "conditioning set");
  const IndexSet comp = complement(n, A);
  if (comp.empty()) throw ConfigError("conditioning set must be a strict subset of the ground set");
  if (A.empty()) return L;
  MatrixXd M = L;
  for (auto i : comp) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0;
  const MatrixXd inv = checked_inverse(M, "L + I_{A^c}");
  MatrixXd LA = checked_inverse(linalg::principal_submatrix(inv, comp), "complement block of (L + I_{A^c})^{-1}");
  LA -= MatrixXd::Identity(LA.rows(), LA.cols());
  return 0.5 * (LA + LA.transpose());
}

VectorXd conditional_probabilities(const MatrixXd& L, const IndexSet& A) {
  const MatrixXd LA = conditional_kernel(L, A);
  const VectorXd d = LA.diagonal().cwiseMax(0.0);
  const double total = d.sum();
  if (!(total > 0.0)) throw NumericalError("every candidate has zero conditional weight");
  return d / total;
}

double conditional_kdpp_log_prob(const MatrixXd& L, const IndexSet& A, const IndexSet& B) {
  const auto n = static_cast<std::size_t>(L.rows());
  check_subset(n, B, "completion");
  for (auto b : B)
    if (std::find(A.begin(), A.end(), b) != A.end()) throw ConfigError("completion item already lies in A");
  if (B.empty()) return 0.0;
  const IndexSet comp = complement(n, A);
  if (comp.empty()) throw ConfigError("no candidates remain outside A");
  const MatrixXd LA = conditional_kernel(L, A);
  if (B.size() == 1) {
    const double total = LA.diagonal().cwiseMax(0.0).sum();
    const double v = LA(static_cast<Eigen::Index>(position(comp, B[0])), static_cast<Eigen::Index>(position(comp, B[0])));
    if (!(v > 0.0) || !(total > 0.0)) return kNegInf;
    return std::log(v) - std::log(total);
  }
  if (B.size() > comp.size()) throw ConfigError("completion is larger than the candidate set");
  IndexSet local;
  for (auto b : B) local.push_back(position(comp, b));
  const linalg::LogDetResult det = linalg::log_det_spd(linalg::principal_submatrix(LA, local));
  if (!det.ok) return kNegInf;
  const VectorXd ev = linalg::sym_eigenvalues_desc(LA).cwiseMax(0.0);
  const std::vector<double> lam(ev.data(), ev.data() + ev.size());
  return det.value - elementary_symmetric(lam, B.size()).log_value;
}

double conditional_kdpp_log_likelihood(const MatrixXd& L, const std::vector<Completion>& samples) {
  double s = 0.0;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    const double v = conditional_kdpp_log_prob(L, samples[t].A, samples[t].B);
    if (v == kNegInf) return kNegInf;
    s += v;
  }
  return s;
}

ConditionalModel::ConditionalModel(std::vector<ConditionalGroup> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ConfigError("conditional model needs at least one ground set");
  for (const auto& g : groups_)
    if (!g.family) throw ConfigError("conditional group without kernel family");
  const auto names = groups_.front().family->parameter_names();
  for (const auto& g : groups_) {
    if (g.family->parameter_names() != names) throw ConfigError("all ground sets must share one parameterization");
    const std::size_t n = g.family->ground().size();
    for (std::size_t t = 0; t < g.samples.size(); ++t) {
      const auto& c = g.samples[t];
      check_subset(n, c.A, "annotation partial set");
      check_subset(n, c.B, "annotation completion");
      for (auto b : c.B)
        if (std::find(c.A.begin(), c.A.end(), b) != c.A.end())
          throw ConfigError("annotation " + std::to_string(t) + " in '" + g.name + "' adds an item already in A");
      if (c.A.size() >= n) throw ConfigError("annotation " + std::to_string(t) + " leaves no candidates");
    }
  }
}

std::vector<std::string> ConditionalModel::parameter_names() const {
  return groups_.front().family->parameter_names();
}

double ConditionalModel::log_likelihood(std::span<const double> theta) const {
  double s = 0.0;
  for (const auto& g : groups_) {
    double v = kNegInf;
    try {
      v = conditional_kdpp_log_likelihood(g.family->kernel(theta), g.samples);
    } catch (const NumericalError&) {
      // A singular conditioning block gives the parameters zero likelihood.
      return kNegInf;
    }
    if (v == kNegInf) return kNegInf;
    s += v;
  }
  return s;
}

std::unique_ptr<LikelihoodBounds> ConditionalModel::likelihood_bounds(std::span<const double> theta,
                                                                      const TightenSchedule&) const {
  return std::make_unique<ExactLikelihood>(log_likelihood(theta));
}

}  // namespace dpplearn
