#pragma once

#include "error.hpp"
#include "estimate.hpp"
#include "survival.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace censim {

struct SimulationConfig
{
  int config_id = 2;
  // Config 1: upper bound of the uniform censoring law. Configs 2-3: rate of
  // the exponential censoring law (density lambda e^{-lambda c}).
  double censoring_param = 0.1;
  // When set, censoring_param is calibrated to hit this censored fraction.
  std::optional<double> censoring_target;
  int n = 100;
  int replications = 200;
  std::uint64_t seed = 1;
  std::vector<Method> methods{ Method::wls, Method::sd };
  EstimatorConfig estimator;
  // 0 = CENSIM_THREADS or hardware concurrency.
  unsigned threads = 0;
};

inline void
validate(const SimulationConfig& c)
{
  if (c.config_id < 1 || c.config_id > 3)
    throw Error("config id must be 1, 2 or 3");
  if (c.n < 20)
    throw Error("n must be at least 20");
  if (c.replications < 1)
    throw Error("replications must be at least 1");
  if (!c.censoring_target && !(c.censoring_param > 0.0))
    throw Error("censoring parameter must be positive");
  if (c.censoring_target && !(*c.censoring_target > 0.0 && *c.censoring_target < 1.0))
    throw Error("censoring target must lie in (0, 1)");
  if (c.methods.empty())
    throw Error("no methods requested");
}

//! theta_0 of each configuration.
inline IndexParam
true_theta(int config_id)
{
  switch (config_id) {
    case 1:
      return IndexParam({ 1.0, 1.0 });
    case 2:
    case 3:
      return IndexParam({ 1.0, 2.0 });
  }
  throw Error("config id must be 1, 2 or 3");
}

//! Link function f(u) of each configuration.
inline double
true_link(int config_id, double u)
{
  switch (config_id) {
    case 1:
      return 0.5 * u * u + 1.0;
    case 2:
      return 2.0 * std::exp(0.5 * u) / (0.5 + u);
    case 3:
      return 1.0 + 0.1 * u * u - 0.2 * (u - 1.0);
  }
  throw Error("config id must be 1, 2 or 3");
}

//! Known censoring distribution G for oracle computations.
inline FunctionCdf
censoring_law(int config_id, double param)
{
  if (config_id == 1)
    return FunctionCdf([param](double t) { return std::clamp(t / param, 0.0, 1.0); });
  return FunctionCdf([param](double t) { return t <= 0.0 ? 0.0 : 1.0 - std::exp(-param * t); });
}

struct DgpDraw
{
  Sample observations;
  std::vector<double> latent_y;
  std::vector<double> latent_c;
};

//! n i.i.d. draws from a configuration; latent (Y, C) kept for oracle checks.
template<class Rng>
DgpDraw
dgp_sample(int config_id, double censoring_param, int n, Rng& rng)
{
  if (config_id < 1 || config_id > 3)
    throw Error("config id must be 1, 2 or 3");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto theta = true_theta(config_id);
  // noise standard deviations: variances 2, 1, 1/16
  const double noise_sd = config_id == 1 ? std::sqrt(2.0) : config_id == 2 ? 1.0 : 0.25;

  DgpDraw out;
  out.observations.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(2);
    switch (config_id) {
      case 1:
        x[0] = -2.0 + 4.0 * unit(rng);
        x[1] = -2.0 + 4.0 * unit(rng);
        break;
      case 2:
        x[0] = unit(rng);
        x[1] = unit(rng);
        break;
      default:
        x[0] = unit(rng) < 0.6 ? 1.0 : 0.0;
        x[1] = -1.0 + 2.0 * unit(rng);
        break;
    }
    const double y = true_link(config_id, theta.dot(x)) + noise_sd * gauss(rng);
    const double c = config_id == 1 ? censoring_param * unit(rng)
                                    : -std::log1p(-unit(rng)) / censoring_param;
    out.latent_y.push_back(y);
    out.latent_c.push_back(c);
    out.observations.push_back({ std::min(y, c), y <= c, std::move(x) });
  }
  return out;
}

//! SplitMix64 finalizer.
inline std::uint64_t
mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Independent generator for replication r of a run seeded with seed.
inline std::mt19937_64
replication_stream(std::uint64_t seed, std::uint64_t r)
{
  std::seed_seq seq{ static_cast<std::uint32_t>(mix64(seed)), static_cast<std::uint32_t>(mix64(seed) >> 32),
                     static_cast<std::uint32_t>(mix64(r ^ 0x5bd1e995ULL)),
                     static_cast<std::uint32_t>(mix64(r ^ 0x5bd1e995ULL) >> 32) };
  return std::mt19937_64(seq);
}

//! Censored fraction of `draws` pilot observations at a given parameter.
inline double
pilot_censoring(int config_id, double param, int draws, std::uint64_t seed)
{
  auto rng = replication_stream(seed, 0xC0FFEEULL);
  const auto d = dgp_sample(config_id, param, draws, rng);
  return censoring_fraction(d.observations);
}

//! Bisection on the censoring parameter so the pilot censored fraction hits
//! `target`. Uses common random numbers, so the pilot curve is monotone.
inline double
calibrate_censoring(int config_id, double target, std::uint64_t seed, int draws = 10000)
{
  if (!(target > 0.0 && target < 1.0))
    throw Error("censoring target must lie in (0, 1)");
  // censoring grows with the exponential rate and shrinks with the uniform bound
  const bool increasing = config_id != 1;
  double lo = 1e-4, hi = 1e4;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double frac = pilot_censoring(config_id, mid, draws, seed);
    if ((frac < target) == increasing)
      lo = mid;
    else
      hi = mid;
    if (hi / lo < 1.0 + 1e-10)
      break;
  }
  return std::sqrt(lo * hi);
}

inline unsigned
worker_count(unsigned requested)
{
  if (requested > 0)
    return requested;
  if (const char* env = std::getenv("CENSIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0)
      return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

//! Runs fn(i) for i in [0, count) on a pool of `threads` workers.
template<class Fn>
void
parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{ 0 };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++)
        fn(i);
    });
  for (auto& th : pool)
    th.join();
}

struct MethodOutcome
{
  Method method = Method::wls;
  bool ok = false;
  std::string error;
  FitResult fit;
  double squared_error = 0.0;
};

struct ReplicationOutcome
{
  double censoring_fraction = 0.0;
  std::vector<MethodOutcome> methods;
};

//! Fits every requested method on every replication. Replication r draws
//! from replication_stream(seed, r) and fits with estimator seed mix64(seed ^ r).
inline std::vector<ReplicationOutcome>
run_replications(const SimulationConfig& config, double censoring_param)
{
  validate(config);
  const auto theta0 = true_theta(config.config_id);
  std::vector<ReplicationOutcome> out(static_cast<std::size_t>(config.replications));
  parallel_for(out.size(), worker_count(config.threads), [&](std::size_t r) {
    auto rng = replication_stream(config.seed, r);
    const auto draw = dgp_sample(config.config_id, censoring_param, config.n, rng);
    auto& rep = out[r];
    rep.censoring_fraction = censoring_fraction(draw.observations);
    EstimatorConfig est = config.estimator;
    est.seed = mix64(config.seed ^ (r * 0x9e3779b97f4a7c15ULL));
    for (Method m : config.methods) {
      MethodOutcome mo;
      mo.method = m;
      try {
        mo.fit = fit(draw.observations, m, est);
        mo.squared_error = squared_distance(mo.fit.theta_hat, theta0);
        mo.ok = true;
      } catch (const std::exception& e) {
        mo.error = e.what();
      }
      rep.methods.push_back(std::move(mo));
    }
  });
  return out;
}

struct MethodSummary
{
  Method method = Method::wls;
  double mse = 0.0;
  double mse_se = 0.0;
  double median_error = 0.0;
  double mean_trimmed_fraction = 0.0;
  // Fraction of successful fits whose 95% Wald interval covers each free coordinate.
  std::vector<double> coverage;
  int failures = 0;
  bool failure_flag = false;
};

struct MseReport
{
  int config_id = 2;
  double censoring_param = 0.0;
  std::optional<double> censoring_target;
  int n = 0;
  int replications = 0;
  std::uint64_t seed = 0;
  double mean_censoring_fraction = 0.0;
  std::vector<MethodSummary> methods;
};

inline double
median(std::vector<double> v)
{
  if (v.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

//! Aggregates replications in index order.
inline MseReport
summarize(const SimulationConfig& config,
          double censoring_param,
          const std::vector<ReplicationOutcome>& reps)
{
  MseReport rep;
  rep.config_id = config.config_id;
  rep.censoring_param = censoring_param;
  rep.censoring_target = config.censoring_target;
  rep.n = config.n;
  rep.replications = config.replications;
  rep.seed = config.seed;
  for (const auto& r : reps)
    rep.mean_censoring_fraction += r.censoring_fraction;
  rep.mean_censoring_fraction /= static_cast<double>(reps.size());

  const auto theta0 = true_theta(config.config_id);
  for (std::size_t k = 0; k < config.methods.size(); ++k) {
    MethodSummary s;
    s.method = config.methods[k];
    std::vector<double> sq, err;
    std::vector<double> covered(theta0.free_dim(), 0.0);
    double trimmed = 0.0;
    int with_variance = 0;
    for (const auto& r : reps) {
      const auto& mo = r.methods[k];
      if (!mo.ok) {
        ++s.failures;
        continue;
      }
      sq.push_back(mo.squared_error);
      err.push_back(std::sqrt(mo.squared_error));
      trimmed += mo.fit.trimmed_fraction;
      if (mo.fit.variance_ok) {
        ++with_variance;
        for (std::size_t j = 0; j < theta0.free_dim(); ++j)
          if (std::abs(mo.fit.theta_hat[j + 1] - theta0[j + 1]) <= 1.959963984540054 * mo.fit.se[j])
            covered[j] += 1.0;
      }
    }
    const double m = static_cast<double>(sq.size());
    if (!sq.empty()) {
      for (double v : sq)
        s.mse += v;
      s.mse /= m;
      double ss = 0.0;
      for (double v : sq)
        ss += (v - s.mse) * (v - s.mse);
      s.mse_se = sq.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
      s.median_error = median(err);
      s.mean_trimmed_fraction = trimmed / m;
    } else {
      s.mse = s.median_error = std::numeric_limits<double>::quiet_NaN();
    }
    for (double& c : covered)
      c = with_variance > 0 ? c / with_variance : std::numeric_limits<double>::quiet_NaN();
    s.coverage = covered;
    s.failure_flag = s.failures > 0.05 * static_cast<double>(reps.size());
    rep.methods.push_back(std::move(s));
  }
  return rep;
}

//! Monte Carlo MSE of theta-hat for one configuration and sample size.
inline MseReport
run_monte_carlo(const SimulationConfig& config)
{
  validate(config);
  const double param = config.censoring_target
                         ? calibrate_censoring(config.config_id, *config.censoring_target, config.seed)
                         : config.censoring_param;
  return summarize(config, param, run_replications(config, param));
}

inline nlohmann::json
to_json(const MseReport& r)
{
  nlohmann::json j;
  j["config"] = r.config_id;
  j["censoring_param"] = r.censoring_param;
  j["censoring_target"] = r.censoring_target ? nlohmann::json(*r.censoring_target) : nlohmann::json(nullptr);
  j["n"] = r.n;
  j["replications"] = r.replications;
  j["seed"] = r.seed;
  j["mean_censoring_fraction"] = r.mean_censoring_fraction;
  j["methods"] = nlohmann::json::array();
  for (const auto& s : r.methods) {
    j["methods"].push_back({ { "method", std::string(to_string(s.method)) },
                             { "mse", s.mse },
                             { "mse_se", s.mse_se },
                             { "median_error", s.median_error },
                             { "mean_trimmed_fraction", s.mean_trimmed_fraction },
                             { "wald95_coverage", s.coverage },
                             { "failures", s.failures },
                             { "failure_flag", s.failure_flag } });
  }
  return j;
}

//! Aligned table: one block per censoring level, methods as rows, n as columns.
inline std::string
format_table(const std::vector<MseReport>& reports)
{
  std::ostringstream os;
  if (reports.empty())
    return {};
  std::vector<int> ns;
  for (const auto& r : reports)
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end())
      ns.push_back(r.n);

  auto sci = [](double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(4) << v;
    return s.str();
  };

  const auto& first = reports.front();
  os << "Config " << first.config_id << "  (" << first.replications << " replications, seed "
     << first.seed << ")\n";
  os << std::left << std::setw(26) << "censoring" << std::setw(8) << "method";
  for (int n : ns)
    os << std::setw(26) << ("n=" + std::to_string(n));
  os << "\n";

  std::ostringstream pl;
  pl << std::setprecision(6) << "param=" << first.censoring_param;
  std::ostringstream cf;
  cf << "censored=" << std::fixed << std::setprecision(3) << first.mean_censoring_fraction;
  for (std::size_t k = 0; k < first.methods.size(); ++k) {
    os << std::left << std::setw(26) << (k == 0 ? pl.str() : k == 1 ? cf.str() : "")
       << std::setw(8) << to_string(first.methods[k].method);
    for (int n : ns) {
      const auto it = std::find_if(reports.begin(), reports.end(),
                                   [n](const MseReport& r) { return r.n == n; });
      const auto& s = it->methods[k];
      std::string cell = sci(s.mse) + " (" + sci(s.mse_se) + ")";
      if (s.failure_flag)
        cell += "!";
      os << std::setw(26) << cell;
    }
    os << "\n";
  }
  if (first.methods.size() < 2)
    os << std::left << std::setw(26) << cf.str() << "\n";
  return os.str();
}

} // namespace censim
