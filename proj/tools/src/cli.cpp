#include "dpplearn_cli/cli.hpp"

#include "dpplearn/conditional.hpp"
#include "dpplearn/diagnostics.hpp"
#include "dpplearn/io.hpp"
#include "dpplearn/mcmc.hpp"
#include "dpplearn/mle.hpp"
#include "dpplearn/moments.hpp"
#include "dpplearn/sampling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>

#ifndef DPPLEARN_VERSION_STRING
#define DPPLEARN_VERSION_STRING "unknown"
#endif

namespace dpplearn::cli {

std::string version() { return DPPLEARN_VERSION_STRING; }

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- run options ----------------------------------------------------------------

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> burnin;
  std::optional<std::size_t> thin;
  std::optional<std::string> sampler;
  std::string out_dir = "out";
  std::optional<std::string> data;
  std::vector<std::string> traces;
};

/// Config plus the flag overrides, resolved into a "run" section.
struct Resolved {
  Json config;
  fs::path base;  // directory that relative paths in the config refer to
  std::uint64_t seed = 0;
  std::size_t chains = 1;
  std::size_t iters = 1000;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::string sampler;
  fs::path out;

  fs::path path(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  }
};

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

const Json& require(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("config is missing '") + key + "' in " + where);
  return j.at(key);
}

Json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  if (get_or<int>(j, "schema_version", 0) != kSchemaVersion)
    throw ConfigError("unsupported schema_version; expected " + std::to_string(kSchemaVersion));
  return j;
}

Resolved resolve(const RunOptions& o, const std::string& default_sampler) {
  Resolved r;
  r.config = load_config(o.config_path);
  r.base = fs::path(o.config_path).parent_path();
  const Json run = r.config.contains("run") ? r.config["run"] : Json::object();
  r.seed = o.seed.value_or(get_or<std::uint64_t>(run, "seed", 1));
  r.chains = o.chains.value_or(get_or<std::size_t>(run, "chains", 1));
  r.iters = o.iters.value_or(get_or<std::size_t>(run, "iters", 1000));
  r.burnin = o.burnin.value_or(get_or<std::size_t>(run, "burnin", 0));
  r.thin = o.thin.value_or(get_or<std::size_t>(run, "thin", 1));
  r.sampler = o.sampler.value_or(get_or<std::string>(run, "sampler", default_sampler));
  r.out = o.out_dir;
  if (r.chains == 0) throw ConfigError("--chains must be at least 1");
  if (r.thin == 0) throw ConfigError("--thin must be at least 1");
  if (o.data) r.config["data"] = fs::absolute(*o.data).string();
  r.config["run"] = Json{{"seed", r.seed},     {"chains", r.chains}, {"iters", r.iters},
                         {"burnin", r.burnin}, {"thin", r.thin},     {"sampler", r.sampler}};
  fs::create_directories(r.out);
  return r;
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << std::setw(2) << j << '\n';
}

Json provenance(const Resolved& r, const std::string& command) {
  return Json{{"command", command}, {"version", version()}, {"config", r.config}};
}

// ---- models ---------------------------------------------------------------------

enum class Kind { Continuous, DiscreteGaussian, GaussianSimilarity };

struct ModelSpec {
  Kind kind = Kind::Continuous;
  std::size_t dim = 2;
  bool isotropic = true;
  Process process = Process::Dpp;
  std::size_t k = 0;
  std::shared_ptr<KernelFamily> family;  // discrete kinds only

  bool continuous() const { return kind == Kind::Continuous; }
};

std::vector<double> doubles(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(std::string(what) + " must hold numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

ModelSpec parse_model(const Json& cfg) {
  const Json& m = require(cfg, "model", "the top level");
  ModelSpec s;
  const std::string type = get_or<std::string>(m, "type", "continuous-gaussian");
  const std::string process = get_or<std::string>(m, "process", "dpp");
  if (process == "dpp") {
    s.process = Process::Dpp;
  } else if (process == "kdpp") {
    s.process = Process::KDpp;
    s.k = get_or<std::size_t>(m, "k", 0);
    if (s.k == 0) throw ConfigError("model.process kdpp needs model.k >= 1");
  } else {
    throw ConfigError("model.process must be dpp or kdpp");
  }
  if (type == "continuous-gaussian") {
    s.kind = Kind::Continuous;
    s.dim = get_or<std::size_t>(m, "dim", 2);
    s.isotropic = get_or<bool>(m, "isotropic", true);
    if (s.dim == 0) throw ConfigError("model.dim must be positive");
    return s;
  }
  if (type != "discrete-gaussian" && type != "gaussian-similarity")
    throw ConfigError("unknown model.type '" + type + "'");
  s.kind = type == "discrete-gaussian" ? Kind::DiscreteGaussian : Kind::GaussianSimilarity;
  const Json& lat = require(m, "lattice", "model");
  std::vector<std::size_t> counts;
  for (double c : doubles(require(lat, "counts", "model.lattice"), "model.lattice.counts")) {
    if (!(c >= 1.0) || c != std::floor(c)) throw ConfigError("lattice counts must be positive integers");
    counts.push_back(static_cast<std::size_t>(c));
  }
  const double spacing = get_or<double>(lat, "spacing", 1.0);
  std::vector<double> origin = lat.contains("origin") ? doubles(lat["origin"], "model.lattice.origin")
                                                      : std::vector<double>(counts.size(), 0.0);
  if (origin.size() != counts.size()) throw ConfigError("lattice origin and counts differ in length");
  GroundSet g = lattice(counts, spacing, origin);
  s.dim = counts.size();
  if (s.kind == Kind::DiscreteGaussian)
    s.family = std::make_shared<GaussianQualitySimilarityFamily>(std::move(g));
  else
    s.family = std::make_shared<GaussianSimilarityFamily>(std::move(g));
  return s;
}

std::vector<std::string> parameter_names(const ModelSpec& s) {
  if (s.continuous()) return ContinuousGaussianModel(s.dim, s.isotropic, {}, s.process, s.k).parameter_names();
  return s.family->parameter_names();
}

/// Parameter vector from {"name": value} (a bare "rho" fills rho_1..rho_D)
/// or from an array in parameter order.
std::vector<double> parse_theta(const Json& j, const std::vector<std::string>& names, const char* what) {
  std::vector<double> v;
  if (j.is_array()) {
    v = doubles(j, what);
    if (v.size() != names.size())
      throw ConfigError(std::string(what) + " needs " + std::to_string(names.size()) + " values");
  } else if (j.is_object()) {
    for (const auto& n : names) {
      const auto us = n.find('_');
      const std::string stem = us == std::string::npos ? n : n.substr(0, us);
      if (j.contains(n))
        v.push_back(j[n].get<double>());
      else if (j.contains(stem))
        v.push_back(j[stem].get<double>());
      else
        throw ConfigError(std::string(what) + " is missing parameter '" + n + "'");
    }
  } else {
    throw ConfigError(std::string(what) + " must be an object or an array");
  }
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + " values must be positive");
  return v;
}

std::vector<IndexSet> locate_all(const GroundSet& g, const std::vector<PointConfig>& samples) {
  std::vector<IndexSet> out;
  for (const auto& s : samples) out.push_back(g.locate(s, 1e-6));
  return out;
}

std::shared_ptr<Model> make_model(const ModelSpec& s, const std::vector<PointConfig>& samples) {
  for (const auto& p : samples)
    if (!p.empty() && p.dim() != s.dim) throw ConfigError("data dimension does not match model.dim");
  if (s.continuous())
    return std::make_shared<ContinuousGaussianModel>(s.dim, s.isotropic, samples, s.process, s.k);
  return std::make_shared<DiscreteModel>(s.family, locate_all(s.family->ground(), samples), s.process, s.k);
}

std::vector<InvGammaPrior> parse_priors(const Json& cfg, std::size_t n) {
  const Json pr = cfg.contains("prior") ? cfg["prior"] : Json::object();
  InvGammaPrior p{get_or<double>(pr, "shape", 0.001), get_or<double>(pr, "scale", 0.001)};
  p.validate();
  return std::vector<InvGammaPrior>(n, p);
}

std::vector<PointConfig> read_data(const Resolved& r, const std::string& key = "data") {
  const Json& d = require(r.config, key.c_str(), "the config (or pass --data)");
  return io::read_point_patterns(r.path(d.get<std::string>()).string()).samples;
}

// ---- samplers ----------------------------------------------------------------------

const std::set<std::string> kSamplers{"mh", "slice", "bounded-mh", "bounded-slice", "mle"};

struct SamplerSettings {
  std::vector<double> init;  // natural scale
  std::vector<double> proposal;
  std::vector<double> widths;
  double overdispersion = 1.0;
  TightenSchedule schedule;
};

SamplerSettings parse_sampler_settings(const Json& cfg, const std::vector<std::string>& names) {
  const Json fit = cfg.contains("fit") ? cfg["fit"] : Json::object();
  SamplerSettings s;
  const std::size_t n = names.size();
  if (fit.contains("init"))
    s.init = parse_theta(fit["init"], names, "fit.init");
  else if (cfg.contains("theta"))
    s.init = parse_theta(cfg["theta"], names, "theta");
  else
    s.init.assign(n, 1.0);
  auto vec = [&](const char* key, double fallback) {
    if (!fit.contains(key)) return std::vector<double>(n, fallback);
    if (fit[key].is_number()) return std::vector<double>(n, fit[key].get<double>());
    auto v = doubles(fit[key], key);
    if (v.size() != n) throw ConfigError(std::string("fit.") + key + " needs one value per parameter");
    return v;
  };
  s.proposal = vec("proposal_scales", 0.1);
  s.widths = vec("slice_widths", 1.0);
  s.overdispersion = get_or<double>(fit, "overdispersion", 1.0);
  s.schedule.initial_M = get_or<std::size_t>(fit, "initial_M", s.schedule.initial_M);
  s.schedule.max_M = get_or<std::size_t>(fit, "max_M", s.schedule.max_M);
  return s;
}

/// Log-scale starting points: chain 0 at the initial value, the others
/// perturbed by N(0, overdispersion^2) per coordinate.
std::vector<std::vector<double>> starting_points(const SamplerSettings& s, std::size_t chains, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < chains; ++c) {
    std::vector<double> z;
    for (double v : s.init) z.push_back(std::log(v) + (c == 0 ? 0.0 : s.overdispersion * n01(rng)));
    out.push_back(z);
  }
  return out;
}

mcmc::Chain run_chain(const Posterior& post, const std::string& sampler, const SamplerSettings& s,
                      const std::vector<double>& z0, std::size_t iters, std::uint64_t seed) {
  if (sampler == "mh") return mcmc::rw_mh(z0, post.exact_target(), {s.proposal}, iters, seed);
  if (sampler == "slice") return mcmc::slice_hyperrect(z0, post.exact_target(), s.widths, iters, seed);
  if (sampler == "bounded-mh") return mcmc::bounded_mh(z0, post.bounded_target(s.schedule), {s.proposal}, iters, seed);
  if (sampler == "bounded-slice")
    return mcmc::bounded_slice(z0, post.bounded_target(s.schedule), s.widths, iters, seed);
  throw ConfigError("unknown sampler '" + sampler + "'");
}

std::vector<mcmc::Chain> run_chains(const Posterior& post, const std::string& sampler, const SamplerSettings& s,
                                    std::size_t chains, std::size_t iters, std::uint64_t seed) {
  const auto starts = starting_points(s, chains, seed);
  std::vector<std::future<mcmc::Chain>> jobs;
  for (std::size_t c = 0; c < chains; ++c)
    jobs.push_back(std::async(std::launch::async, [&, c] { return run_chain(post, sampler, s, starts[c], iters, seed + c); }));
  std::vector<mcmc::Chain> out;
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      out.push_back(j.get());
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
  return out;
}

Json summarize_values(std::vector<double> v) {
  if (v.empty()) return Json{{"n", 0}};
  double m = 0, m2 = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double x : v) m2 += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(m2 / static_cast<double>(v.size() - 1)) : 0.0;
  return Json{{"n", v.size()},
              {"mean", m},
              {"sd", sd},
              {"q05", mcmc::quantile(v, 0.05)},
              {"q25", mcmc::quantile(v, 0.25)},
              {"q50", mcmc::quantile(v, 0.50)},
              {"q75", mcmc::quantile(v, 0.75)},
              {"q95", mcmc::quantile(v, 0.95)}};
}

/// Pooled natural-scale draws of column j after burn-in and thinning.
std::vector<double> pooled(const std::vector<mcmc::Chain>& chains, std::size_t j, std::size_t burnin, std::size_t thin) {
  std::vector<double> v;
  for (const auto& c : chains)
    for (double z : mcmc::trace(c, j, burnin, thin)) v.push_back(std::exp(z));
  return v;
}

Json chain_summary(const std::vector<mcmc::Chain>& chains, const std::vector<std::string>& names, const Resolved& r,
                   const ModelSpec* spec) {
  Json params = Json::object();
  std::vector<mcmc::Psrf> psrf;
  const std::size_t burn = std::min(r.burnin, chains.front().size());
  if (chains.size() > 1 && chains.front().size() - burn >= 2) psrf = mcmc::gelman_rubin(chains, burn);
  for (std::size_t j = 0; j < names.size(); ++j) {
    Json p = summarize_values(pooled(chains, j, burn, r.thin));
    if (!psrf.empty()) p["psrf"] = psrf[j].infinite ? Json("inf") : Json(psrf[j].value);
    params[names[j]] = p;
  }
  Json out{{"parameters", params}};
  if (!psrf.empty()) {
    double s = 0;
    bool inf = false;
    for (const auto& p : psrf) {
      s += p.value;
      inf = inf || p.infinite;
    }
    out["average_psrf"] = inf ? Json("inf") : Json(s / static_cast<double>(psrf.size()));
  }
  Json per_chain = Json::array();
  for (const auto& c : chains)
    per_chain.push_back(Json{{"seed", c.seed},
                             {"sampler", c.sampler},
                             {"acceptance_rate", c.acceptance_rate()},
                             {"tightenings", c.tightenings},
                             {"max_truncation", c.max_level}});
  out["chains"] = per_chain;
  if (spec && spec->continuous()) {
    Json gam = Json::object();
    for (std::size_t d = 0; d < spec->dim; ++d) {
      const std::size_t jr = spec->isotropic ? 1 : 1 + d;
      const std::size_t js = spec->isotropic ? 2 : 1 + spec->dim + d;
      std::vector<double> g;
      for (const auto& c : chains) {
        const auto rho = mcmc::trace(c, jr, burn, r.thin);
        const auto sig = mcmc::trace(c, js, burn, r.thin);
        for (std::size_t i = 0; i < rho.size(); ++i) g.push_back(std::exp(sig[i] - rho[i]));
      }
      gam[spec->isotropic ? "gamma" : "gamma_" + std::to_string(d + 1)] = summarize_values(g);
      if (spec->isotropic) break;
    }
    out["repulsion"] = gam;
  }
  return out;
}

// ---- simulate -----------------------------------------------------------------------

GridSpec simulation_grid(const Json& sim, const GaussianTheta& th) {
  double max_rho = 0, min_sigma = INFINITY;
  for (std::size_t d = 0; d < th.dim(); ++d) {
    max_rho = std::max(max_rho, th.rho[d]);
    min_sigma = std::min(min_sigma, th.sigma[d]);
  }
  const Json grid = sim.contains("grid") ? sim["grid"] : Json::object();
  const double half = 4.0 * std::sqrt(max_rho);
  const auto lo = grid.contains("lo") ? doubles(grid["lo"], "simulate.grid.lo") : std::vector<double>(th.dim(), -half);
  const auto hi = grid.contains("hi") ? doubles(grid["hi"], "simulate.grid.hi") : std::vector<double>(th.dim(), half);
  if (lo.size() != th.dim() || hi.size() != th.dim()) throw ConfigError("simulate.grid lo/hi must match model.dim");
  const double spacing = get_or<double>(grid, "spacing", std::sqrt(min_sigma) / 3.0 * 0.999);
  return GridSpec::with_spacing(lo, hi, spacing);
}

int cmd_simulate(const RunOptions& o, std::ostream& out) {
  const Resolved r = resolve(o, "none");
  const ModelSpec spec = parse_model(r.config);
  const auto names = parameter_names(spec);
  const auto theta = parse_theta(require(r.config, "theta", "the top level"), names, "theta");
  const Json sim = r.config.contains("simulate") ? r.config["simulate"] : Json::object();
  const std::size_t count = get_or<std::size_t>(sim, "samples", 10);
  SamplerRng rng(r.seed);

  std::vector<PointConfig> samples;
  Json report{{"samples", count}};
  if (spec.continuous()) {
    const GaussianTheta th = ContinuousGaussianModel(spec.dim, spec.isotropic, {}, spec.process, spec.k).unpack(theta);
    const GridSpec grid = simulation_grid(sim, th);
    report["grid"] = Json{{"lo", grid.lo}, {"hi", grid.hi}, {"counts", grid.counts}};
    if (count > 0) {
      const GridDppSampler gs(th, grid);
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      for (std::size_t t = 0; t < count; ++t) {
        if (spec.process == Process::Dpp) {
          samples.push_back(gs.sample(rng));
          continue;
        }
        PointConfig p = gs.ground().points(gs.sampler().sample_kdpp(spec.k, rng));
        for (Eigen::Index i = 0; i < p.points.rows(); ++i)
          for (Eigen::Index d = 0; d < p.points.cols(); ++d)
            p.points(i, d) += unif(rng) * grid.spacing(static_cast<std::size_t>(d));
        samples.push_back(std::move(p));
      }
    }
    if (spec.process == Process::Dpp)
      report["analytic_cardinality"] = continuous_gaussian_moments(th, {0})[0].per_dim[0];
  } else {
    const MatrixXd L = spec.family->kernel(theta);
    const DppSampler sampler(L);
    for (std::size_t t = 0; t < count; ++t) {
      const IndexSet idx = spec.process == Process::Dpp ? sampler.sample_dpp(rng) : sampler.sample_kdpp(spec.k, rng);
      samples.push_back(spec.family->ground().points(idx));
    }
    if (spec.process == Process::Dpp) report["analytic_cardinality"] = marginal_kernel(L).trace();
  }
  double mean = 0;
  for (const auto& s : samples) mean += static_cast<double>(s.size());
  report["mean_cardinality"] = samples.empty() ? 0.0 : mean / static_cast<double>(samples.size());

  io::write_point_patterns((r.out / "samples.csv").string(), samples, spec.dim);
  Json summary = provenance(r, "simulate");
  summary["result"] = report;
  write_json(r.out / "simulate.json", summary);
  out << "wrote " << samples.size() << " samples to " << (r.out / "samples.csv").string() << "; mean cardinality "
      << report["mean_cardinality"].get<double>();
  if (report.contains("analytic_cardinality"))
    out << " (analytic " << report["analytic_cardinality"].get<double>() << ")";
  out << '\n';
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------------------

int run_mle(const Resolved& r, const ModelSpec& spec, const std::vector<PointConfig>& data,
            const std::vector<std::string>& names, std::ostream& out) {
  if (spec.continuous()) throw ConfigError("the mle sampler supports discrete models only");
  const std::vector<DiscreteGroup> groups{{spec.family, locate_all(spec.family->ground(), data)}};
  const SamplerSettings s = parse_sampler_settings(r.config, names);
  const Json mj = r.config.contains("fit") && r.config["fit"].contains("mle") ? r.config["fit"]["mle"] : Json::object();
  mle::AscentOptions opt;
  opt.step = get_or<double>(mj, "step", opt.step);
  opt.max_iterations = get_or<std::size_t>(mj, "max_iterations", r.iters);
  opt.tolerance = get_or<double>(mj, "tolerance", opt.tolerance);
  const auto starts = starting_points(s, r.chains, r.seed);
  std::vector<std::future<mle::AscentResult>> jobs;
  for (std::size_t c = 0; c < r.chains; ++c)
    jobs.push_back(std::async(std::launch::async, [&, c] {
      std::vector<double> th;
      for (double z : starts[c]) th.push_back(std::exp(z));
      return mle::gradient_ascent(groups, th, opt, spec.process, spec.k);
    }));
  Json runs = Json::array();
  for (std::size_t c = 0; c < r.chains; ++c) {
    const mle::AscentResult res = jobs[c].get();
    std::ofstream f(r.out / ("mle_" + std::to_string(c) + ".csv"));
    f << "iter";
    for (const auto& n : names) f << ',' << n;
    f << ",objective,grad_norm,step\n" << std::setprecision(17);
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
      f << i;
      for (double v : res.trace[i].theta) f << ',' << v;
      f << ',' << res.trace[i].objective << ',' << res.trace[i].grad_norm << ',' << res.trace[i].step << '\n';
    }
    Json th = Json::object();
    for (std::size_t j = 0; j < names.size(); ++j) th[names[j]] = res.theta[j];
    runs.push_back(Json{{"theta", th},
                        {"log_likelihood", res.objective},
                        {"grad_norm", res.grad_norm},
                        {"iterations", res.iterations},
                        {"converged", res.converged},
                        {"stop_reason", res.stop_reason}});
    out << "run " << c << ": log-likelihood " << res.objective << ", " << res.stop_reason << '\n';
  }
  Json summary = provenance(r, "fit");
  summary["mle"] = runs;
  write_json(r.out / "summary.json", summary);
  return kExitOk;
}

int cmd_fit(const RunOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Resolved r = resolve(o, "slice");
  if (!kSamplers.count(r.sampler)) throw ConfigError("unknown sampler '" + r.sampler + "'");
  const ModelSpec spec = parse_model(r.config);
  const auto names = parameter_names(spec);
  const auto data = read_data(r);
  if (r.sampler == "mle") return run_mle(r, spec, data, names, out);

  const auto model = make_model(spec, data);
  const Posterior post(model, parse_priors(r.config, names.size()));
  const SamplerSettings s = parse_sampler_settings(r.config, names);
  const auto chains = run_chains(post, r.sampler, s, r.chains, r.iters, r.seed);
  for (std::size_t c = 0; c < chains.size(); ++c)
    io::write_chain((r.out / ("chain_" + std::to_string(c) + ".csv")).string(), chains[c], names);

  Json summary = provenance(r, "fit");
  summary["posterior"] = chain_summary(chains, names, r, &spec);
  summary["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(r.out / "summary.json", summary);
  out << "wrote " << chains.size() << " chain(s) of " << r.iters << " iterations to " << r.out.string() << '\n';
  if (summary["posterior"].contains("average_psrf")) out << "average PSRF " << summary["posterior"]["average_psrf"] << '\n';
  return kExitOk;
}

// ---- moments ------------------------------------------------------------------------------

int cmd_moments(const RunOptions& o, std::ostream& out) {
  const Resolved r = resolve(o, "none");
  const ModelSpec spec = parse_model(r.config);
  const auto names = parameter_names(spec);
  const auto data = read_data(r);
  std::vector<std::string> traces = o.traces;
  const Json mc = r.config.contains("moments") ? r.config["moments"] : Json::object();
  if (traces.empty() && mc.contains("traces"))
    for (const auto& t : mc["traces"]) traces.push_back(r.path(t.get<std::string>()).string());
  if (traces.empty()) throw ConfigError("moments needs at least one trace (--trace or moments.traces)");

  mcmc::Chain pooled_chain;
  std::vector<std::vector<double>> rows;
  for (const auto& t : traces) {
    const io::ChainTable tab = io::read_chain(t);
    if (tab.names != names) throw ConfigError("trace " + t + " columns do not match the model parameters");
    const std::size_t burn = std::min(r.burnin, tab.chain.size());
    for (std::size_t i = burn; i < tab.chain.size(); i += r.thin) {
      std::vector<double> row(names.size());
      for (std::size_t j = 0; j < names.size(); ++j)
        row[j] = tab.chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      rows.push_back(row);
    }
  }
  if (rows.empty()) throw ConfigError("the trace holds no draws after burn-in");
  pooled_chain.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      pooled_chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];

  MomentCheckOptions opt;
  opt.log_scale = false;
  if (mc.contains("orders")) {
    opt.orders.clear();
    for (const auto& v : mc["orders"]) opt.orders.push_back(v.get<int>());
  }
  std::vector<MomentReport> reports;
  if (spec.continuous()) {
    const ContinuousGaussianModel model(spec.dim, spec.isotropic, data, spec.process, spec.k);
    reports = moment_check(pooled_chain, data, model, opt);
  } else {
    reports = moment_check(pooled_chain, locate_all(spec.family->ground(), data), *spec.family, opt);
  }
  io::write_moment_reports((r.out / "moments.csv").string(), reports);
  Json rep = Json::array();
  for (const auto& m : reports)
    rep.push_back(Json{{"order", m.order},
                       {"dim", m.dim + 1},
                       {"theoretical_mean", m.theoretical_mean},
                       {"band", {m.band_lo, m.band_hi}},
                       {"empirical", m.empirical},
                       {"empirical_se", m.empirical_se},
                       {"inside_band", m.inside_band()}});
  Json summary = provenance(r, "moments");
  summary["draws"] = rows.size();
  summary["reports"] = rep;
  write_json(r.out / "moments.json", summary);
  for (const auto& m : reports)
    out << "order " << m.order << " dim " << m.dim + 1 << ": empirical " << m.empirical << ", band [" << m.band_lo
        << ", " << m.band_hi << "]" << (m.inside_band() ? "" : " OUTSIDE") << '\n';
  return kExitOk;
}

// ---- classify-loo ---------------------------------------------------------------------------

struct ClassData {
  std::string name;
  std::vector<PointConfig> samples;
};

struct ClassPosterior {
  std::vector<double> mean_theta;             // exp of the posterior mean of log-parameters
  std::vector<std::vector<double>> draws;     // natural scale, evenly spaced
  std::vector<mcmc::Chain> chains;
};

ClassPosterior fit_posterior(const ModelSpec& spec, const std::vector<PointConfig>& samples, const Resolved& r,
                             const std::string& sampler, const SamplerSettings& s, std::uint64_t seed) {
  const auto model = make_model(spec, samples);
  const Posterior post(model, parse_priors(r.config, model->num_parameters()));
  ClassPosterior cp;
  cp.chains = run_chains(post, sampler, s, r.chains, r.iters, seed);
  const std::size_t n = model->num_parameters();
  std::vector<std::vector<double>> all;
  for (const auto& c : cp.chains) {
    const std::size_t burn = std::min(r.burnin, c.size());
    for (std::size_t i = burn; i < c.size(); i += r.thin) {
      std::vector<double> z(n);
      for (std::size_t j = 0; j < n; ++j) z[j] = c.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      all.push_back(z);
    }
  }
  if (all.empty()) throw ConfigError("no posterior draws remain after burn-in");
  cp.mean_theta.assign(n, 0.0);
  for (const auto& z : all)
    for (std::size_t j = 0; j < n; ++j) cp.mean_theta[j] += z[j];
  for (auto& v : cp.mean_theta) v = std::exp(v / static_cast<double>(all.size()));
  const std::size_t keep = std::min<std::size_t>(50, all.size());
  for (std::size_t i = 0; i < keep; ++i) {
    auto z = all[i * all.size() / keep];
    for (auto& v : z) v = std::exp(v);
    cp.draws.push_back(z);
  }
  return cp;
}

double log_mean_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

int cmd_classify(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(o, "bounded-slice");
  if (r.sampler == "mle" || !kSamplers.count(r.sampler)) throw ConfigError("classify-loo needs an MCMC sampler");
  const ModelSpec spec = parse_model(r.config);
  const auto names = parameter_names(spec);
  const SamplerSettings s = parse_sampler_settings(r.config, names);
  const Json& cl = require(r.config, "classes", "the top level");
  std::vector<ClassData> classes;
  for (const auto& c : cl) {
    ClassData d;
    d.name = require(c, "name", "classes[]").get<std::string>();
    d.samples = io::read_point_patterns(r.path(require(c, "data", "classes[]").get<std::string>()).string()).samples;
    classes.push_back(std::move(d));
  }
  if (classes.size() < 2) throw ConfigError("classify-loo needs at least two classes");

  struct Fold {
    std::size_t cls, idx;
  };
  std::vector<Fold> folds;
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t i = 0; i < classes[c].samples.size(); ++i) {
      if (classes[c].samples.size() < 2) {
        err << "warning: class '" << classes[c].name << "' has a single sample; its fold is skipped\n";
        continue;
      }
      folds.push_back({c, i});
    }

  struct FoldResult {
    std::vector<double> plugin, averaged;
    std::size_t predicted = 0;
  };
  std::vector<std::future<FoldResult>> jobs;
  for (std::size_t f = 0; f < folds.size(); ++f)
    jobs.push_back(std::async(std::launch::async, [&, f] {
      FoldResult res;
      const auto& held = classes[folds[f].cls].samples[folds[f].idx];
      for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<PointConfig> train;
        for (std::size_t i = 0; i < classes[c].samples.size(); ++i)
          if (c != folds[f].cls || i != folds[f].idx) train.push_back(classes[c].samples[i]);
        const ClassPosterior cp = fit_posterior(spec, train, r, r.sampler, s, r.seed + 1000 * (f + 1) + c);
        const auto held_model = make_model(spec, {held});
        res.plugin.push_back(held_model->log_likelihood(cp.mean_theta));
        std::vector<double> lls;
        for (const auto& th : cp.draws) lls.push_back(held_model->log_likelihood(th));
        res.averaged.push_back(log_mean_exp(lls));
      }
      res.predicted = static_cast<std::size_t>(
          std::max_element(res.plugin.begin(), res.plugin.end()) - res.plugin.begin());
      return res;
    }));

  std::ofstream csv(r.out / "classify.csv");
  csv << "class,sample";
  for (const auto& c : classes) csv << ",ll_plugin_" << c.name;
  for (const auto& c : classes) csv << ",ll_averaged_" << c.name;
  csv << ",predicted\n" << std::setprecision(12);
  std::size_t correct = 0;
  Json fold_json = Json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const FoldResult res = jobs[f].get();
    const auto& truth = classes[folds[f].cls].name;
    csv << truth << ',' << folds[f].idx;
    for (double v : res.plugin) csv << ',' << v;
    for (double v : res.averaged) csv << ',' << v;
    csv << ',' << classes[res.predicted].name << '\n';
    correct += res.predicted == folds[f].cls ? 1 : 0;
    fold_json.push_back(Json{{"class", truth},
                             {"sample", folds[f].idx},
                             {"predicted", classes[res.predicted].name},
                             {"ll_plugin", res.plugin},
                             {"ll_averaged", res.averaged}});
  }

  Json class_json = Json::object();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const ClassPosterior cp = fit_posterior(spec, classes[c].samples, r, r.sampler, s, r.seed + c);
    class_json[classes[c].name] = chain_summary(cp.chains, names, r, &spec);
  }
  Json summary = provenance(r, "classify-loo");
  summary["folds"] = fold_json;
  summary["accuracy"] = folds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(folds.size());
  summary["classes"] = class_json;
  write_json(r.out / "classify.json", summary);
  out << correct << "/" << folds.size() << " held-out samples classified correctly\n";
  return kExitOk;
}

// ---- image-diversity ---------------------------------------------------------------------------

int cmd_image_diversity(const RunOptions& o, std::ostream& out) {
  const Resolved r = resolve(o, "slice");
  if (r.sampler == "mle" || !kSamplers.count(r.sampler)) throw ConfigError("image-diversity needs an MCMC sampler");
  const Json& cfg = require(r.config, "image_diversity", "the top level");
  const std::string mode = get_or<std::string>(cfg, "mode", "conditional");
  auto subs = io::read_features(r.path(require(cfg, "features", "image_diversity").get<std::string>()).string());
  if (subs.empty()) throw ConfigError("feature file holds no subcategories");
  if (get_or<bool>(cfg, "normalize", false))
    for (auto& s : subs) s.features.normalize_rows();
  std::map<std::string, const io::Subcategory*> by_name;
  for (const auto& s : subs) by_name[s.name] = &s;
  auto find_sub = [&](const std::string& n) -> const io::Subcategory& {
    auto it = by_name.find(n);
    if (it == by_name.end()) throw ConfigError("unknown subcategory '" + n + "'");
    return *it->second;
  };

  // category -> subcategories; one shared parameter vector per category
  std::map<std::string, std::vector<std::string>> categories;
  if (cfg.contains("categories")) {
    for (const auto& [cat, list] : cfg["categories"].items())
      for (const auto& n : list) categories[cat].push_back(n.get<std::string>());
  } else {
    for (const auto& s : subs) categories["all"].push_back(s.name);
  }

  std::vector<io::AnnotationRow> ann;
  std::vector<io::TopKRow> topk;
  std::size_t k = 0;
  if (mode == "conditional") {
    ann = io::read_annotations(r.path(require(cfg, "annotations", "image_diversity").get<std::string>()).string());
  } else if (mode == "plain-kdpp") {
    topk = io::read_topk(r.path(require(cfg, "topk", "image_diversity").get<std::string>()).string());
    k = get_or<std::size_t>(cfg, "k", topk.empty() ? 0 : topk.front().items.size());
    for (const auto& row : topk)
      if (row.items.size() != k) throw ConfigError("every top-k row must list exactly k = " + std::to_string(k) + " items");
  } else {
    throw ConfigError("image_diversity.mode must be conditional or plain-kdpp");
  }

  Json results = Json::object();
  for (const auto& [cat, members] : categories) {
    std::shared_ptr<Model> model;
    std::vector<std::string> names;
    if (mode == "conditional") {
      std::vector<ConditionalGroup> groups;
      for (const auto& n : members) {
        const auto& sub = find_sub(n);
        ConditionalGroup g{n, std::make_shared<FeatureFamily>(sub.features), {}};
        for (const auto& row : ann) {
          if (row.subcategory != n) continue;
          Completion c;
          for (const auto& id : row.partial) c.A.push_back(sub.index_of(id));
          c.B.push_back(sub.index_of(row.added));
          g.samples.push_back(c);
        }
        if (!g.samples.empty()) groups.push_back(std::move(g));
      }
      if (groups.empty()) throw ConfigError("category '" + cat + "' has no annotations");
      auto m = std::make_shared<ConditionalModel>(std::move(groups));
      names = m->parameter_names();
      model = m;
    } else {
      std::vector<DiscreteGroup> groups;
      for (const auto& n : members) {
        const auto& sub = find_sub(n);
        DiscreteGroup g{std::make_shared<FeatureFamily>(sub.features), {}};
        for (const auto& row : topk) {
          if (row.subcategory != n) continue;
          IndexSet s;
          for (const auto& id : row.items) s.push_back(sub.index_of(id));
          g.samples.push_back(s);
        }
        if (!g.samples.empty()) groups.push_back(std::move(g));
      }
      if (groups.empty()) throw ConfigError("category '" + cat + "' has no top-k rows");
      auto m = std::make_shared<DiscreteModel>(std::move(groups), Process::KDpp, k);
      names = m->parameter_names();
      model = m;
    }
    const Posterior post(model, parse_priors(r.config, names.size()));
    const SamplerSettings s = parse_sampler_settings(r.config, names);
    const auto chains = run_chains(post, r.sampler, s, r.chains, r.iters, r.seed);
    for (std::size_t c = 0; c < chains.size(); ++c)
      io::write_chain((r.out / ("sigma_" + cat + "_chain" + std::to_string(c) + ".csv")).string(), chains[c], names);
    results[cat] = chain_summary(chains, names, r, nullptr);
    out << "category " << cat << ":";
    for (const auto& n : names) out << ' ' << n << " median " << results[cat]["parameters"][n]["q50"].get<double>();
    out << '\n';
  }
  Json summary = provenance(r, "image-diversity");
  summary["categories"] = results;
  write_json(r.out / "summary.json", summary);
  return kExitOk;
}

void add_common(CLI::App* sub, RunOptions& o, bool sampling) {
  sub->add_option("--config", o.config_path, "JSON config (schema_version 1)")->required();
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
  if (!sampling) return;
  sub->add_option("--chains", o.chains, "number of chains (run concurrently)");
  sub->add_option("--iters", o.iters, "iterations per chain");
  sub->add_option("--burnin", o.burnin, "draws discarded from the start of each chain in summaries");
  sub->add_option("--thin", o.thin, "keep every n-th draw in summaries");
  sub->add_option("--sampler", o.sampler, "mh | slice | bounded-mh | bounded-slice | mle");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn DPP and k-DPP kernel parameters"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);
  RunOptions o;
  auto* sim = app.add_subcommand("simulate", "draw synthetic point patterns from a configured model");
  add_common(sim, o, false);
  auto* fit = app.add_subcommand("fit", "posterior sampling or maximum likelihood");
  add_common(fit, o, true);
  fit->add_option("--data", o.data, "point-pattern CSV (overrides config.data)");
  auto* mom = app.add_subcommand("moments", "posterior moment bands against empirical moments");
  add_common(mom, o, true);
  mom->add_option("--data", o.data, "point-pattern CSV (overrides config.data)");
  mom->add_option("--trace", o.traces, "trace CSV written by fit (repeatable)");
  auto* cls = app.add_subcommand("classify-loo", "leave-one-out classification by class posteriors");
  add_common(cls, o, true);
  auto* img = app.add_subcommand("image-diversity", "feature bandwidths from annotations or top-k lists");
  add_common(img, o, true);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out);
    if (fit->parsed()) return cmd_fit(o, out);
    if (mom->parsed()) return cmd_moments(o, out);
    if (cls->parsed()) return cmd_classify(o, out, err);
    if (img->parsed()) return cmd_image_diversity(o, out);
  } catch (const BoundedStepUnresolved& e) {
    err << "bounded step unresolved: " << e.what() << " (lower " << e.lower() << ", upper " << e.upper()
        << ", threshold " << e.threshold() << ")\n";
    return kExitUnresolved;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace dpplearn::cli
