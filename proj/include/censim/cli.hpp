#pragma once

#include "estimate.hpp"
#include "io.hpp"
#include "simulate.hpp"
#include "survival.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace censim::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kDataError = 2;
inline constexpr int kFitError = 3;

struct FitArgs
{
  std::string input;
  std::string method = "wls";
  double bandwidth_const = 1.0;
  double trim_frac = 0.1;
  std::uint64_t seed = 0;
  std::string output = "json";
};

struct SimulateArgs
{
  int config = 2;
  std::optional<double> cens_param;
  std::optional<double> cens_target;
  std::vector<int> n{ 100 };
  int reps = 200;
  std::uint64_t seed = 1;
  std::string methods = "wls,sd";
  double bandwidth_const = 1.0;
  double trim_frac = 0.1;
  unsigned threads = 0;
  std::string output = "table";
};

struct KmArgs
{
  std::string input;
  std::string target = "event";
  std::string output = "csv";
};

inline EstimatorConfig
estimator_config(double bandwidth_const, double trim_frac, std::uint64_t seed)
{
  EstimatorConfig c;
  c.bandwidth.constant = bandwidth_const;
  c.trim.relative_threshold = trim_frac;
  c.seed = seed;
  return c;
}

inline nlohmann::json
fit_to_json(const FitResult& r)
{
  nlohmann::json j;
  j["method"] = std::string(to_string(r.method));
  j["theta_hat"] = r.theta_hat.values();
  j["theta_preliminary"] = r.theta_preliminary.values();
  j["se"] = r.se;
  nlohmann::json vcov = nlohmann::json::array();
  for (Eigen::Index a = 0; a < r.vcov.rows(); ++a) {
    std::vector<double> row;
    for (Eigen::Index b = 0; b < r.vcov.cols(); ++b)
      row.push_back(r.vcov(a, b));
    vcov.push_back(row);
  }
  j["vcov"] = vcov;
  j["variance_ok"] = r.variance_ok;
  if (!r.variance_ok)
    j["variance_error"] = r.variance_error;
  j["criterion_value"] = r.criterion_value;
  j["converged"] = r.converged;
  j["evaluations"] = r.evaluations;
  j["n"] = r.n;
  j["n_trimmed"] = r.n_trimmed;
  j["trimmed_fraction"] = r.trimmed_fraction;
  j["censoring_fraction"] = r.censoring_fraction;
  j["bandwidth"] = r.bandwidth;
  j["search_radius"] = r.radius;
  return j;
}

inline std::string
fit_to_table(const FitResult& r)
{
  std::ostringstream os;
  os << std::setprecision(10);
  os << "method            " << to_string(r.method) << "\n";
  os << "n                 " << r.n << "\n";
  os << "censored          " << r.censoring_fraction << "\n";
  os << "trimmed           " << r.trimmed_fraction << "\n";
  os << "bandwidth         " << r.bandwidth << "\n";
  os << "criterion         " << r.criterion_value << "\n";
  os << "converged         " << (r.converged ? "yes" : "no") << "\n";
  os << "\ncoef    estimate          std.error\n";
  for (std::size_t j = 0; j < r.theta_hat.dim(); ++j) {
    os << std::left << std::setw(8) << ("x" + std::to_string(j + 1)) << std::setw(18)
       << r.theta_hat[j];
    if (j == 0)
      os << "(fixed)";
    else if (r.variance_ok)
      os << r.se[j - 1];
    else
      os << "NA";
    os << "\n";
  }
  if (!r.variance_ok)
    os << "\nvariance unavailable: " << r.variance_error << "\n";
  return os.str();
}

inline int
cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err)
{
  if (args.output != "json" && args.output != "table") {
    err << "error: --output must be json or table\n";
    return kDataError;
  }
  Sample sample;
  Method method;
  try {
    method = parse_method(args.method);
    sample = read_dataset(args.input);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  try {
    const auto result =
      fit(sample, method, estimator_config(args.bandwidth_const, args.trim_frac, args.seed));
    if (args.output == "json")
      out << fit_to_json(result).dump(2) << "\n";
    else
      out << fit_to_table(result);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFitError;
  }
  return kOk;
}

inline int
cmd_km(const KmArgs& args, std::ostream& out, std::ostream& err)
{
  if (args.output != "csv") {
    err << "error: --output must be csv\n";
    return kDataError;
  }
  if (args.target != "event" && args.target != "censoring") {
    err << "error: --target must be event or censoring\n";
    return kDataError;
  }
  try {
    const auto sample = read_dataset(args.input);
    const auto cdf =
      km_fit(sample, args.target == "event" ? KmTarget::event : KmTarget::censoring);
    if (cdf.empty())
      err << "warning: no " << (args.target == "event" ? "uncensored" : "censored")
          << " observations; empty jump list\n";
    write_step_cdf(out, cdf);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

inline int
cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err)
{
  if (args.output != "json" && args.output != "table") {
    err << "error: --output must be json or table\n";
    return kDataError;
  }
  SimulationConfig config;
  try {
    config.config_id = args.config;
    config.censoring_target = args.cens_target;
    if (args.cens_param)
      config.censoring_param = *args.cens_param;
    else if (!args.cens_target)
      config.censoring_param = args.config == 1 ? 2.4 : args.config == 2 ? 0.1 : 2.0;
    config.replications = args.reps;
    config.seed = args.seed;
    config.threads = args.threads;
    config.estimator = estimator_config(args.bandwidth_const, args.trim_frac, 0);
    config.methods.clear();
    std::stringstream ms(args.methods);
    for (std::string m; std::getline(ms, m, ',');)
      config.methods.push_back(parse_method(m));
    if (args.n.empty())
      throw Error("no sample sizes given");
    for (int n : args.n) {
      config.n = n;
      validate(config);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }

  std::vector<MseReport> reports;
  for (int n : args.n) {
    config.n = n;
    reports.push_back(run_monte_carlo(config));
  }
  if (args.output == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports)
      j.push_back(to_json(r));
    out << j.dump(2) << "\n";
  } else {
    out << format_table(reports);
  }
  for (const auto& r : reports)
    for (const auto& s : r.methods)
      if (s.failure_flag)
        err << "warning: " << to_string(s.method) << " failed in " << s.failures << " of "
            << r.replications << " replications at n=" << r.n << "\n";
  return kOk;
}

//! Parses argv and dispatches. Returns the process exit code.
inline int
run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Single-index regression with right-censored responses" };
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate the index direction from a CSV dataset");
  fit_cmd->add_option("--input", fit_args.input, "CSV with header t,delta,x1,...,xd")->required();
  fit_cmd->add_option("--method", fit_args.method, "wls or sd")->capture_default_str();
  fit_cmd->add_option("--bandwidth-const", fit_args.bandwidth_const, "bandwidth constant c_h")
    ->capture_default_str();
  fit_cmd->add_option("--trim-frac", fit_args.trim_frac,
                      "density trimming threshold as a fraction of the maximum")
    ->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.seed, "seed for optimizer restarts")->capture_default_str();
  fit_cmd->add_option("--output", fit_args.output, "json or table")->capture_default_str();

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo MSE for a simulation configuration");
  sim_cmd->add_option("--config", sim_args.config, "configuration 1, 2 or 3")->required();
  auto* param_opt = sim_cmd->add_option("--cens-param", sim_args.cens_param,
                                        "uniform bound (config 1) or exponential rate (2, 3)");
  auto* target_opt =
    sim_cmd->add_option("--cens-target", sim_args.cens_target, "target censored fraction");
  param_opt->excludes(target_opt);
  sim_cmd->add_option("--n", sim_args.n, "sample size(s), comma separated")
    ->delimiter(',')
    ->capture_default_str();
  sim_cmd->add_option("--reps", sim_args.reps, "replications")->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.seed, "master seed")->capture_default_str();
  sim_cmd->add_option("--methods", sim_args.methods, "comma separated subset of wls,sd")
    ->capture_default_str();
  sim_cmd->add_option("--bandwidth-const", sim_args.bandwidth_const, "bandwidth constant c_h")
    ->capture_default_str();
  sim_cmd->add_option("--trim-frac", sim_args.trim_frac, "density trimming fraction")
    ->capture_default_str();
  sim_cmd->add_option("--threads", sim_args.threads, "worker threads (0 = CENSIM_THREADS or all)")
    ->capture_default_str();
  sim_cmd->add_option("--output", sim_args.output, "table or json")->capture_default_str();

  KmArgs km_args;
  auto* km_cmd = app.add_subcommand("km", "Kaplan-Meier curve of the event or censoring law");
  km_cmd->add_option("--input", km_args.input, "CSV with header t,delta,x1,...,xd")->required();
  km_cmd->add_option("--target", km_args.target, "event or censoring")->capture_default_str();
  km_cmd->add_option("--output", km_args.output, "csv")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }

  if (*fit_cmd)
    return cmd_fit(fit_args, out, err);
  if (*sim_cmd)
    return cmd_simulate(sim_args, out, err);
  return cmd_km(km_args, out, err);
}

} // namespace censim::cli
