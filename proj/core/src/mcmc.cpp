#include "dpplearn/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace dpplearn::mcmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxSliceSteps = 100000;

using Rng = std::mt19937_64;

// Uniform draw on the open interval (0, 1).
double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return u;
}

Chain make_chain(const char* name, std::uint64_t seed, const std::vector<double>& start,
                 std::vector<double> settings, std::size_t iterations) {
  Chain c;
  c.sampler = name;
  c.seed = seed;
  c.start = start;
  c.settings = std::move(settings);
  c.samples.resize(static_cast<Eigen::Index>(iterations), static_cast<Eigen::Index>(start.size()));
  c.log_post.reserve(iterations);
  c.log_post_upper.reserve(iterations);
  c.accepted.reserve(iterations);
  return c;
}

void record(Chain& c, std::size_t it, const std::vector<double>& x, double lo, double hi, bool accepted) {
  for (std::size_t d = 0; d < x.size(); ++d)
    c.samples(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(d)) = x[d];
  c.log_post.push_back(lo);
  c.log_post_upper.push_back(hi);
  c.accepted.push_back(accepted ? 1 : 0);
}

[[noreturn]] void unresolved(const char* what, double lower, double upper, double threshold) {
  std::ostringstream os;
  os << what << ": bounds [" << lower << ", " << upper << "] could not be separated from " << threshold
     << " before the truncation cap";
  throw BoundedStepUnresolved(os.str(), lower, upper, threshold);
}

// Slice membership and level drawing for exact densities.
class ExactOracle {
 public:
  ExactOracle(const LogDensity& f, const std::vector<double>& start) : f_(f), value_(f(start)) {
    if (!std::isfinite(value_)) throw ConfigError("initial point has a non-finite log density");
  }
  double level(Rng& rng) { return value_ + std::log(open_uniform(rng)); }
  bool in_slice(const std::vector<double>& x, double log_y) {
    candidate_ = f_(x);
    return candidate_ > log_y;
  }
  // Called after in_slice returned true for the point that becomes current.
  void accept_candidate() { value_ = candidate_; }
  double lower() const { return value_; }
  double upper() const { return value_; }

 private:
  const LogDensity& f_;
  double value_;
  double candidate_ = kNegInf;
};

// Same interface, resolving every comparison from refinable bounds.
class BoundedOracle {
 public:
  BoundedOracle(const BoundedLogDensity& f, const std::vector<double>& start, Chain& chain)
      : f_(f), current_(f(start)), chain_(chain) {
    if (!std::isfinite(current_->upper())) throw ConfigError("initial point has a non-finite log density");
    note_level(*current_);
  }
  // Rejection sampling of y ~ U[0, P]: propose under the current upper
  // bound, accept below the lower bound, reject above a refreshed upper bound.
  double level(Rng& rng) {
    for (;;) {
      const double log_y = current_->upper() + std::log(open_uniform(rng));
      for (;;) {
        if (log_y < current_->lower()) return log_y;
        if (log_y >= current_->upper()) break;
        if (!current_->tighten()) unresolved("slice level", current_->lower(), current_->upper(), log_y);
        ++chain_.tightenings;
        note_level(*current_);
      }
    }
  }
  bool in_slice(const std::vector<double>& x, double log_y) {
    candidate_ = f_(x);
    note_level(*candidate_);
    for (;;) {
      if (log_y < candidate_->lower()) return true;
      if (log_y >= candidate_->upper()) return false;
      if (!candidate_->tighten()) unresolved("slice membership", candidate_->lower(), candidate_->upper(), log_y);
      ++chain_.tightenings;
      note_level(*candidate_);
    }
  }
  void accept_candidate() { current_ = std::move(candidate_); }
  double lower() const { return current_->lower(); }
  double upper() const { return current_->upper(); }

 private:
  void note_level(const DensityBounds& b) { chain_.max_level = std::max(chain_.max_level, b.level()); }

  const BoundedLogDensity& f_;
  std::unique_ptr<DensityBounds> current_;
  std::unique_ptr<DensityBounds> candidate_;
  Chain& chain_;
};

template <class Oracle>
void hyperrect_step(Oracle& oracle, std::vector<double>& x, const std::vector<double>& widths, Rng& rng) {
  const double log_y = oracle.level(rng);
  const std::size_t dim = x.size();
  std::vector<double> lo(dim), hi(dim), cand(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    lo[d] = x[d] - open_uniform(rng) * widths[d];
    hi[d] = lo[d] + widths[d];
  }
  for (std::size_t step = 0; step < kMaxSliceSteps; ++step) {
    for (std::size_t d = 0; d < dim; ++d) cand[d] = lo[d] + open_uniform(rng) * (hi[d] - lo[d]);
    if (oracle.in_slice(cand, log_y)) {
      oracle.accept_candidate();
      x = cand;
      return;
    }
    // Shrink each side toward the current point; x itself always stays inside.
    for (std::size_t d = 0; d < dim; ++d) {
      if (cand[d] < x[d])
        lo[d] = cand[d];
      else
        hi[d] = cand[d];
    }
  }
  throw NumericalError("slice shrinkage did not terminate");
}

template <class Oracle>
void univariate_step(Oracle& oracle, double& x, double w, Rng& rng) {
  const double log_y = oracle.level(rng);
  double lo = x - open_uniform(rng) * w;
  double hi = lo + w;
  std::vector<double> probe(1);
  std::size_t expansions = 0;
  probe[0] = lo;
  while (oracle.in_slice(probe, log_y)) {
    lo -= w;
    probe[0] = lo;
    if (++expansions > kMaxSliceSteps) throw NumericalError("slice stepping-out did not terminate");
  }
  probe[0] = hi;
  while (oracle.in_slice(probe, log_y)) {
    hi += w;
    probe[0] = hi;
    if (++expansions > kMaxSliceSteps) throw NumericalError("slice stepping-out did not terminate");
  }
  for (std::size_t step = 0; step < kMaxSliceSteps; ++step) {
    probe[0] = lo + open_uniform(rng) * (hi - lo);
    if (oracle.in_slice(probe, log_y)) {
      oracle.accept_candidate();
      x = probe[0];
      return;
    }
    if (probe[0] < x)
      lo = probe[0];
    else
      hi = probe[0];
  }
  throw NumericalError("slice shrinkage did not terminate");
}

}  // namespace

double Chain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  std::size_t n = 0;
  for (char a : accepted) n += a ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(accepted.size());
}

void ProposalSpec::validate(std::size_t dim) const {
  if (scales.size() != dim) throw ConfigError("proposal needs one scale per parameter");
  for (double s : scales)
    if (!(s > 0.0)) throw ConfigError("proposal scales must be positive");
}

Chain rw_mh(std::vector<double> start, const LogDensity& target, const ProposalSpec& proposal,
            std::size_t iterations, std::uint64_t seed) {
  proposal.validate(start.size());
  Chain chain = make_chain("mh", seed, start, proposal.scales, iterations);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x = std::move(start);
  double fx = target(x);
  if (!std::isfinite(fx)) throw ConfigError("initial point has a non-finite log density");
  std::vector<double> y(x.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t d = 0; d < x.size(); ++d) y[d] = x[d] + proposal.scales[d] * normal(rng);
    const double log_u = std::log(unif(rng));
    const double fy = target(y);
    const bool accept = log_u < fy - fx;
    if (accept) {
      x = y;
      fx = fy;
    }
    record(chain, it, x, fx, fx, accept);
  }
  return chain;
}

Chain bounded_mh(std::vector<double> start, const BoundedLogDensity& target, const ProposalSpec& proposal,
                 std::size_t iterations, std::uint64_t seed, const BoundedOptions& options) {
  proposal.validate(start.size());
  Chain chain = make_chain("bounded-mh", seed, start, proposal.scales, iterations);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x = std::move(start);
  std::unique_ptr<DensityBounds> cur = target(x);
  if (!std::isfinite(cur->upper())) throw ConfigError("initial point has a non-finite log density");
  chain.max_level = cur->level();
  std::vector<double> y(x.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t d = 0; d < x.size(); ++d) y[d] = x[d] + proposal.scales[d] * normal(rng);
    // u is drawn once, before any bound is evaluated or tightened.
    const double log_u = std::log(unif(rng));
    std::unique_ptr<DensityBounds> prop = target(y);
    int decision = 0;
    for (;;) {
      BoundedMhEvent ev;
      ev.step = it;
      ev.log_u = log_u;
      ev.log_r_lower = prop->lower() - cur->upper();
      ev.log_r_upper = prop->upper() - cur->lower();
      ev.level_current = cur->level();
      ev.level_proposal = prop->level();
      chain.max_level = std::max({chain.max_level, ev.level_current, ev.level_proposal});
      if (log_u < ev.log_r_lower)
        decision = 1;
      else if (log_u >= ev.log_r_upper)
        decision = -1;
      ev.decision = decision;
      if (options.on_event) options.on_event(ev);
      if (decision != 0) break;
      const bool a = cur->tighten();
      const bool b = prop->tighten();
      if (!a && !b) unresolved("bounded MH step", ev.log_r_lower, ev.log_r_upper, log_u);
      ++chain.tightenings;
    }
    if (decision > 0) {
      x = y;
      cur = std::move(prop);
    }
    record(chain, it, x, cur->lower(), cur->upper(), decision > 0);
  }
  return chain;
}

Chain slice_univariate(double start, const LogDensity& target, double width, std::size_t iterations,
                       std::uint64_t seed) {
  if (!(width > 0.0)) throw ConfigError("slice width must be positive");
  std::vector<double> s{start};
  Chain chain = make_chain("slice", seed, s, {width}, iterations);
  Rng rng(seed);
  ExactOracle oracle(target, s);
  double x = start;
  for (std::size_t it = 0; it < iterations; ++it) {
    univariate_step(oracle, x, width, rng);
    record(chain, it, {x}, oracle.lower(), oracle.upper(), true);
  }
  return chain;
}

Chain slice_hyperrect(std::vector<double> start, const LogDensity& target, const std::vector<double>& widths,
                      std::size_t iterations, std::uint64_t seed) {
  if (widths.size() != start.size()) throw ConfigError("slice sampler needs one width per parameter");
  for (double w : widths)
    if (!(w > 0.0)) throw ConfigError("slice widths must be positive");
  Chain chain = make_chain("slice", seed, start, widths, iterations);
  Rng rng(seed);
  ExactOracle oracle(target, start);
  std::vector<double> x = std::move(start);
  for (std::size_t it = 0; it < iterations; ++it) {
    hyperrect_step(oracle, x, widths, rng);
    record(chain, it, x, oracle.lower(), oracle.upper(), true);
  }
  return chain;
}

Chain bounded_slice(std::vector<double> start, const BoundedLogDensity& target, const std::vector<double>& widths,
                    std::size_t iterations, std::uint64_t seed, bool univariate_stepping_out) {
  if (widths.size() != start.size()) throw ConfigError("slice sampler needs one width per parameter");
  for (double w : widths)
    if (!(w > 0.0)) throw ConfigError("slice widths must be positive");
  if (univariate_stepping_out && start.size() != 1)
    throw ConfigError("stepping-out construction is univariate");
  Chain chain = make_chain("bounded-slice", seed, start, widths, iterations);
  Rng rng(seed);
  BoundedOracle oracle(target, start, chain);
  std::vector<double> x = std::move(start);
  for (std::size_t it = 0; it < iterations; ++it) {
    if (univariate_stepping_out)
      univariate_step(oracle, x[0], widths[0], rng);
    else
      hyperrect_step(oracle, x, widths, rng);
    record(chain, it, x, oracle.lower(), oracle.upper(), true);
  }
  return chain;
}

}  // namespace dpplearn::mcmc
