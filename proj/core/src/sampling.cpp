#include "dpplearn/sampling.hpp"

#include "dpplearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpplearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

DppSampler::DppSampler(const MatrixXd& L) {
  if (L.rows() != L.cols()) throw ConfigError("kernel must be square");
  const linalg::SymEigen eig = linalg::sym_eigen_desc(L);
  values_ = eig.values.cwiseMax(0.0);
  vectors_ = eig.vectors;
}

IndexSet DppSampler::select_items(const std::vector<Eigen::Index>& chosen, SamplerRng& rng) const {
  const auto n = vectors_.rows();
  MatrixXd V(n, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c) V.col(static_cast<Eigen::Index>(c)) = vectors_.col(chosen[c]);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  IndexSet out;
  while (V.cols() > 0) {
    // P(i) = ||V_i||^2 / |V|.
    const VectorXd w = V.rowwise().squaredNorm();
    const double total = w.sum();
    double u = unif(rng) * total;
    Eigen::Index item = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      u -= w(i);
      if (u < 0.0) {
        item = i;
        break;
      }
    }
    while (w(item) <= 0.0 && item > 0) --item;
    out.push_back(static_cast<std::size_t>(item));

    // Project the basis onto the complement of e_item and drop one column.
    Eigen::Index pivot = 0;
    V.row(item).cwiseAbs().maxCoeff(&pivot);
    const VectorXd vp = V.col(pivot) / V(item, pivot);
    for (Eigen::Index c = 0; c < V.cols(); ++c)
      if (c != pivot) V.col(c) -= vp * V(item, c);
    if (pivot != V.cols() - 1) V.col(pivot) = V.col(V.cols() - 1);
    V.conservativeResize(Eigen::NoChange, V.cols() - 1);
    if (V.cols() > 0) {
      Eigen::HouseholderQR<MatrixXd> qr(V);
      V = qr.householderQ() * MatrixXd::Identity(n, V.cols());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

IndexSet DppSampler::sample_dpp(SamplerRng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::Index> chosen;
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (unif(rng) < values_(i) / (1.0 + values_(i))) chosen.push_back(i);
  return select_items(chosen, rng);
}

IndexSet DppSampler::sample_kdpp(std::size_t k, SamplerRng& rng) const {
  const std::size_t n = size();
  if (k > n) throw ConfigError("k exceeds the ground-set size");
  if (k == 0) return {};
  // log E[l][i] = log e_l(lambda_1..lambda_i).
  std::vector<std::vector<double>> E(k + 1, std::vector<double>(n + 1, kNegInf));
  for (std::size_t i = 0; i <= n; ++i) E[0][i] = 0.0;
  for (std::size_t l = 1; l <= k; ++l)
    for (std::size_t i = 1; i <= n; ++i) {
      const double lam = values_(static_cast<Eigen::Index>(i - 1));
      const double with = lam > 0.0 ? std::log(lam) + E[l - 1][i - 1] : kNegInf;
      E[l][i] = log_add(E[l][i - 1], with);
    }
  if (E[k][n] == kNegInf) throw NumericalError("kernel rank is below k; no k-subset has positive probability");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::Index> chosen;
  std::size_t l = k;
  for (std::size_t i = n; i >= 1 && l > 0; --i) {
    const double lam = values_(static_cast<Eigen::Index>(i - 1));
    if (i == l) {  // every remaining eigenvector is needed
      chosen.push_back(static_cast<Eigen::Index>(i - 1));
      --l;
      continue;
    }
    if (lam <= 0.0) continue;
    const double log_p = std::log(lam) + E[l - 1][i - 1] - E[l][i];
    if (std::log(unif(rng)) < log_p) {
      chosen.push_back(static_cast<Eigen::Index>(i - 1));
      --l;
    }
  }
  return select_items(chosen, rng);
}

IndexSet sample_dpp(const MatrixXd& L, std::uint64_t seed) {
  SamplerRng rng(seed);
  return DppSampler(L).sample_dpp(rng);
}

IndexSet sample_kdpp(const MatrixXd& L, std::size_t k, std::uint64_t seed) {
  SamplerRng rng(seed);
  return DppSampler(L).sample_kdpp(k, rng);
}

// ---- grid sampler -------------------------------------------------------------

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < dim(); ++d) v *= spacing(d);
  return v;
}

void GridSpec::validate() const {
  if (lo.empty() || hi.size() != lo.size() || counts.size() != lo.size())
    throw ConfigError("grid bounds and counts must share one positive dimension");
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!(hi[d] > lo[d])) throw ConfigError("grid box must have hi > lo in every dimension");
    if (counts[d] == 0) throw ConfigError("grid needs at least one cell per dimension");
  }
}

GridSpec GridSpec::with_spacing(std::vector<double> lo, std::vector<double> hi, double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  GridSpec g;
  g.lo = std::move(lo);
  g.hi = std::move(hi);
  for (std::size_t d = 0; d < g.lo.size(); ++d)
    g.counts.push_back(static_cast<std::size_t>(std::ceil((g.hi[d] - g.lo[d]) / spacing - 1e-9)));
  g.validate();
  return g;
}

double quality_coverage(const GaussianTheta& theta, const GridSpec& grid) {
  if (grid.dim() != theta.dim()) throw ConfigError("grid dimension does not match theta");
  double c = 1.0;
  for (std::size_t d = 0; d < grid.dim(); ++d) {
    // q^2 / alpha is a normal density with variance rho / 2.
    const double s = std::sqrt(theta.rho[d]);
    c *= 0.5 * (std::erf(grid.hi[d] / s) - std::erf(grid.lo[d] / s));
  }
  return c;
}

namespace {

GroundSet grid_centers(const GridSpec& g) {
  std::vector<double> origin(g.dim());
  for (std::size_t d = 0; d < g.dim(); ++d) origin[d] = g.lo[d] + 0.5 * g.spacing(d);
  // Anisotropic spacings: build on a unit lattice and rescale per coordinate.
  GroundSet unit = lattice(g.counts, 1.0, std::vector<double>(g.dim(), 0.0));
  MatrixXd items = unit.items();
  for (std::size_t d = 0; d < g.dim(); ++d) {
    const auto c = static_cast<Eigen::Index>(d);
    items.col(c) = (items.col(c).array() * g.spacing(d) + origin[d]).matrix();
  }
  return GroundSet(std::move(items));
}

const GridSpec& checked(const GaussianTheta& theta, const GridSpec& grid) {
  theta.validate();
  grid.validate();
  const double cov = quality_coverage(theta, grid);
  if (cov < 1.0 - 1e-4)
    throw ConfigError("grid box covers only " + std::to_string(cov) + " of the quality mass; need >= 1 - 1e-4");
  double min_sqrt_sigma = std::numeric_limits<double>::infinity();
  for (double s : theta.sigma) min_sqrt_sigma = std::min(min_sqrt_sigma, std::sqrt(s));
  for (std::size_t d = 0; d < grid.dim(); ++d)
    if (grid.spacing(d) > min_sqrt_sigma / 3.0 + 1e-12)
      throw ConfigError("grid spacing " + std::to_string(grid.spacing(d)) + " exceeds min sqrt(sigma) / 3 = " +
                        std::to_string(min_sqrt_sigma / 3.0));
  return grid;
}

}  // namespace

GridDppSampler::GridDppSampler(const GaussianTheta& theta, GridSpec grid)
    : grid_(checked(theta, grid)),
      ground_(grid_centers(grid_)),
      L_(continuous_kernel_matrix(ground_.items(), theta) * grid_.cell_volume()),
      sampler_(L_) {}

PointConfig GridDppSampler::sample(SamplerRng& rng) const {
  const IndexSet idx = sampler_.sample_dpp(rng);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  MatrixXd pts(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(grid_.dim()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t d = 0; d < grid_.dim(); ++d)
      pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) =
          ground_.items()(static_cast<Eigen::Index>(idx[r]), static_cast<Eigen::Index>(d)) +
          unif(rng) * grid_.spacing(d);
  return PointConfig(std::move(pts));
}

std::vector<PointConfig> sample_continuous_via_grid(const GaussianTheta& theta, const GridSpec& grid,
                                                    std::size_t count, std::uint64_t seed) {
  const GridDppSampler sampler(theta, grid);
  SamplerRng rng(seed);
  std::vector<PointConfig> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.sample(rng));
  return out;
}

}  // namespace dpplearn
