#pragma once

#include "error.hpp"
#include "index_param.hpp"
#include "nelder_mead.hpp"
#include "smooth.hpp"
#include "survival.hpp"
#include "transform.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace censim {

enum class Method
{
  wls,
  sd
};

inline std::string_view
to_string(Method m)
{
  return m == Method::wls ? "WLS" : "SD";
}

inline Method
parse_method(std::string_view s)
{
  if (s == "wls" || s == "WLS")
    return Method::wls;
  if (s == "sd" || s == "SD")
    return Method::sd;
  throw Error("unknown method '" + std::string(s) + "'");
}

//! Sup-norm ball over the free coordinates 1..d-1.
struct SearchRegion
{
  IndexParam center;
  double radius;

  SearchRegion(IndexParam c, double r)
    : center(std::move(c))
    , radius(r)
  {
    if (!(radius > 0.0))
      throw Error("search radius must be positive");
  }

  bool contains(std::span<const double> free) const
  {
    for (std::size_t j = 0; j < free.size(); ++j)
      if (std::abs(free[j] - center[j + 1]) > radius)
        return false;
    return true;
  }
};

struct EstimatorConfig
{
  BandwidthRule bandwidth;
  KernelSpec kernel;
  TrimmingSpec box = box_trimming();
  TrimmingSpec trim;
  // Compact parameter set for the preliminary estimator; defaults to the
  // ball of radius 5 around (1, 0, ..., 0).
  std::optional<SearchRegion> search;
  double default_search_radius = 5.0;
  // Grid nodes per free coordinate, reduced for larger d so the full grid
  // has at most max_grid_size nodes.
  int grid_points = 51;
  int max_grid_size = 2601;
  // Simplex polish after the preliminary grid search.
  bool polish_preliminary = true;
  // Drop observation i from the kernel sums when evaluating f-hat at X_i.
  bool leave_one_out = true;
  NelderMeadOptions optimizer;
  int restarts = 3;
  std::uint64_t seed = 0;
  bool compute_variance = true;
};

struct FitResult
{
  IndexParam theta_hat{ std::vector<double>{ 1.0 } };
  IndexParam theta_preliminary{ std::vector<double>{ 1.0 } };
  Method method = Method::wls;
  double criterion_value = 0.0;
  // Covariance of the free coordinates of theta_hat: V^-1 W V^-1 / n.
  Eigen::MatrixXd vcov;
  std::vector<double> se;
  bool variance_ok = false;
  std::string variance_error;
  std::size_t n = 0;
  std::size_t n_trimmed = 0;
  double trimmed_fraction = 0.0;
  double censoring_fraction = 0.0;
  double bandwidth = 0.0;
  double radius = 0.0;
  bool converged = false;
  int evaluations = 0;
};

namespace detail {

inline double
fitted_or_mean(const LinkEstimate& link, std::size_t i, bool leave_one_out)
{
  const auto r = link.evaluate_at_sample(i, leave_one_out);
  return r.valid ? r.value : link.response_mean();
}

} // namespace detail

//! Kaplan-Meier weighted squared error: sum_i W_in J_i (T_i - f-hat_i)^2.
inline double
criterion_wls(const WeightedSample& weighted,
              const LinkEstimate& link,
              std::span<const char> mask,
              bool leave_one_out = true)
{
  if (link.size() != weighted.size() || mask.size() != weighted.size())
    throw Error("criterion inputs differ in length");
  double s = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < weighted.size(); ++i) {
    if (!mask[i] || !weighted.observations[i].delta)
      continue;
    any = true;
    if (weighted.weights[i] == 0.0)
      continue;
    const double r = weighted.observations[i].t - detail::fitted_or_mean(link, i, leave_one_out);
    s += weighted.weights[i] * r * r;
  }
  if (!any)
    throw Error("empty criterion");
  return s;
}

//! Synthetic-data squared error: n^-1 sum_i J_i (Y*_i - f-hat_i)^2.
inline double
criterion_sd(const SyntheticSample& synthetic,
             const LinkEstimate& link,
             std::span<const char> mask,
             bool leave_one_out = true)
{
  if (link.size() != synthetic.size() || mask.size() != synthetic.size())
    throw Error("criterion inputs differ in length");
  double s = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < synthetic.size(); ++i) {
    if (!mask[i])
      continue;
    any = true;
    const double r = synthetic.y_star[i] - detail::fitted_or_mean(link, i, leave_one_out);
    s += r * r;
  }
  if (!any)
    throw Error("empty criterion");
  return s / static_cast<double>(synthetic.size());
}

//! Criterion as a function of theta: the link is refit (with its own
//! bandwidth) at every candidate and values are cached per theta.
class Objective
{
public:
  Objective(const WeightedSample& weighted,
            const SyntheticSample& synthetic,
            std::vector<char> mask,
            Method method,
            const EstimatorConfig& config)
    : weighted_(weighted)
    , synthetic_(synthetic)
    , mask_(std::move(mask))
    , method_(method)
    , config_(config)
  {}

  LinkEstimate link_at(const IndexParam& theta) const
  {
    const auto v = index_values(theta, synthetic_.observations);
    const double h = bandwidth(config_.bandwidth, v);
    return link_fit(theta, synthetic_, h, config_.kernel);
  }

  double operator()(const IndexParam& theta)
  {
    if (auto it = cache_.find(theta.values()); it != cache_.end())
      return it->second;
    ++evaluations_;
    const auto link = link_at(theta);
    const double value =
      method_ == Method::wls
        ? criterion_wls(weighted_, link, mask_, config_.leave_one_out)
        : criterion_sd(synthetic_, link, mask_, config_.leave_one_out);
    cache_.emplace(theta.values(), value);
    return value;
  }

  // As operator() but maps a degenerate index (zero spread) to +inf.
  double safe(const IndexParam& theta)
  {
    try {
      return (*this)(theta);
    } catch (const Error& e) {
      if (std::string_view(e.what()) == "degenerate index")
        return std::numeric_limits<double>::infinity();
      throw;
    }
  }

  int evaluations() const { return evaluations_; }
  std::span<const char> mask() const { return mask_; }

private:
  const WeightedSample& weighted_;
  const SyntheticSample& synthetic_;
  std::vector<char> mask_;
  Method method_;
  const EstimatorConfig& config_;
  std::map<std::vector<double>, double> cache_;
  int evaluations_ = 0;
};

namespace detail {

inline SearchRegion
default_search(std::size_t d, const EstimatorConfig& config)
{
  if (config.search) {
    if (config.search->center.dim() != d)
      throw Error("search region dimension does not match covariates");
    return *config.search;
  }
  std::vector<double> c(d, 0.0);
  c[0] = 1.0;
  return SearchRegion(IndexParam(std::move(c)), config.default_search_radius);
}

inline NelderMeadResult
minimize_in_region(Objective& objective,
                   const SearchRegion& region,
                   const std::vector<double>& start,
                   double step,
                   const NelderMeadOptions& opts)
{
  auto f = [&](const std::vector<double>& free) {
    if (!region.contains(free))
      return std::numeric_limits<double>::infinity();
    return objective.safe(IndexParam::from_free(free));
  };
  return nelder_mead(f, start, std::vector<double>(start.size(), step), opts);
}

} // namespace detail

//! Preliminary estimator theta_n: grid search over the compact region with
//! fixed-box trimming, then a simplex polish from the best grid node.
inline IndexParam
preliminary_fit(Objective& objective, const SearchRegion& search, const EstimatorConfig& config)
{
  const std::size_t p = search.center.free_dim();
  if (p == 0)
    return search.center;

  int per_dim = config.grid_points;
  while (per_dim > 3 && std::pow(static_cast<double>(per_dim), static_cast<double>(p)) >
                          static_cast<double>(config.max_grid_size))
    --per_dim;
  const double spacing = 2.0 * search.radius / static_cast<double>(per_dim - 1);

  std::vector<int> node(p, 0);
  std::vector<double> best_free = search.center.free();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> free(p);
  while (true) {
    for (std::size_t j = 0; j < p; ++j)
      free[j] = search.center[j + 1] - search.radius + spacing * node[j];
    const double value = objective.safe(IndexParam::from_free(free));
    if (value < best) {
      best = value;
      best_free = free;
    }
    std::size_t j = 0;
    while (j < p && ++node[j] == per_dim)
      node[j++] = 0;
    if (j == p)
      break;
  }

  if (config.polish_preliminary) {
    const auto polished =
      detail::minimize_in_region(objective, search, best_free, spacing, config.optimizer);
    if (polished.value < best)
      best_free = polished.x;
  }
  return IndexParam::from_free(best_free);
}

inline IndexParam
preliminary_fit(std::span<const Observation> sample,
                Method method,
                const TrimmingSpec& box,
                const SearchRegion& search,
                const EstimatorConfig& config = {})
{
  if (sample.empty())
    throw Error("empty sample");
  const auto weighted = km_weights(sample);
  const auto synthetic = synthetic_transform(sample);
  TrimmingSpec box_spec = box;
  box_spec.mode = TrimMode::fixed_box;
  auto mask = trimming_mask(box_spec, search.center, sample, 1.0, config.kernel);
  Objective objective(weighted, synthetic, std::move(mask), method, config);
  return preliminary_fit(objective, search, config);
}

//! Sandwich covariance V^-1 W V^-1 / n of the free coordinates, from the link
//! fitted at theta-hat on the synthetic responses and the trimming mask used
//! by the criterion.
inline Eigen::MatrixXd
variance_plugin(std::span<const Observation> sample,
                const LinkEstimate& link,
                Method method,
                std::span<const char> mask,
                bool leave_one_out = true)
{
  const std::size_t n = sample.size();
  if (n == 0)
    throw Error("empty sample");
  const std::size_t p = link.theta().free_dim();
  const double nd = static_cast<double>(n);

  const auto g_hat = km_fit(sample, KmTarget::censoring);
  const auto h_hat = empirical_cdf(sample);
  const auto weighted = km_weights(sample);
  const auto synthetic = synthetic_transform(sample, g_hat);

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(p));
  std::vector<double> fitted(n, 0.0), g;
  for (std::size_t i = 0; i < n; ++i) {
    fitted[i] = detail::fitted_or_mean(link, i, leave_one_out);
    if (!mask[i] || !link.gradient_at_sample(i, leave_one_out, g))
      continue;
    for (std::size_t j = 0; j < p; ++j)
      grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[j + 1];
  }

  const Eigen::MatrixXd info = grad.transpose() * grad / nd;

  // Integrand of the Kaplan-Meier integral whose G-hat fluctuation is corrected.
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(p));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!mask[i])
      continue;
    const double resid_y = sample[i].t - fitted[i];
    if (method == Method::wls) {
      phi.row(ii) = resid_y * grad.row(ii);
      u.row(ii) = nd * weighted.weights[i] * resid_y * grad.row(ii);
    } else {
      phi.row(ii) = sample[i].t * grad.row(ii);
      u.row(ii) = (synthetic.y_star[i] - fitted[i]) * grad.row(ii);
    }
  }

  std::vector<double> c_minus(n);
  for (std::size_t k = 0; k < n; ++k)
    c_minus[k] = c_integral_minus(g_hat, h_hat, sample[k].t).value;

  // U_i += sum_k W_k phi_k psi(T_k, T_i, delta_i) with
  // psi(y, T, delta) = (1 - delta) 1{y > T} / (1 - H(T)) - C(min(y, T)-).
  Eigen::RowVectorXd acc(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    acc.setZero();
    const double surv_h = 1.0 - h_hat.value(sample[i].t);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = weighted.weights[k];
      if (w == 0.0 || !mask[k])
        continue;
      double psi = -std::min(c_minus[i], c_minus[k]);
      if (!sample[i].delta && sample[k].t > sample[i].t && surv_h > 0.0)
        psi += 1.0 / surv_h;
      acc += w * psi * phi.row(static_cast<Eigen::Index>(k));
    }
    u.row(static_cast<Eigen::Index>(i)) += acc;
  }

  const Eigen::MatrixXd meat = u.transpose() * u / nd;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-10 * top)
    throw Error("singular information");
  const Eigen::MatrixXd inv =
    eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
    eig.eigenvectors().transpose();
  Eigen::MatrixXd vcov = inv * meat * inv / nd;
  return 0.5 * (vcov + vcov.transpose());
}

//! Full pipeline: G-hat, synthetic responses, preliminary estimate with box
//! trimming, density trimming frozen at theta_n, simplex search over the
//! shrinking ball around theta_n, plug-in variance.
inline FitResult
fit(std::span<const Observation> sample, Method method, const EstimatorConfig& config = {})
{
  if (sample.empty())
    throw Error("empty sample");
  const std::size_t n = sample.size();
  const std::size_t d = sample.front().x.size();
  if (d == 0)
    throw Error("observations carry no covariates");
  for (const auto& o : sample) {
    if (o.x.size() != d)
      throw Error("covariate dimension differs across observations");
    if (!std::isfinite(o.t))
      throw Error("observed time must be finite");
  }
  if (n < 10 * d)
    throw Error("sample too small: need n >= 10 d");

  const auto weighted = km_weights(sample);
  const auto synthetic = synthetic_transform(sample);
  const auto search = detail::default_search(d, config);

  FitResult out;
  out.method = method;
  out.n = n;
  out.censoring_fraction = censoring_fraction(sample);

  TrimmingSpec box_spec = config.box;
  box_spec.mode = TrimMode::fixed_box;
  Objective prelim(weighted, synthetic,
                   trimming_mask(box_spec, search.center, sample, 1.0, config.kernel), method,
                   config);
  out.theta_preliminary = preliminary_fit(prelim, search, config);
  out.evaluations += prelim.evaluations();

  const auto& theta_n = out.theta_preliminary;
  const double h_n = bandwidth(config.bandwidth, index_values(theta_n, sample));
  TrimmingSpec trim_spec = config.trim;
  trim_spec.mode = TrimMode::density;
  auto mask = trimming_mask(trim_spec, theta_n, sample, h_n, config.kernel);
  out.n_trimmed = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0));
  out.trimmed_fraction = static_cast<double>(out.n_trimmed) / static_cast<double>(n);
  out.bandwidth = h_n;
  out.radius = std::max(0.5 * std::pow(static_cast<double>(n), -0.25), 2.0 * h_n);

  Objective objective(weighted, synthetic, mask, method, config);
  const SearchRegion ball(theta_n, out.radius);
  const std::size_t p = d - 1;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NelderMeadResult best;
  const double step = 0.25 * out.radius;
  for (int run = 0; run <= config.restarts; ++run) {
    std::vector<double> start = theta_n.free();
    if (run > 0)
      for (std::size_t j = 0; j < p; ++j)
        start[j] += out.radius * unit(rng);
    auto r = detail::minimize_in_region(objective, ball, start, step, config.optimizer);
    if (run == 0 || r.value < best.value)
      best = std::move(r);
  }
  out.evaluations += objective.evaluations();
  out.converged = best.converged;
  out.theta_hat = IndexParam::from_free(best.x);
  out.criterion_value = objective(out.theta_hat);

  if (config.compute_variance && p > 0) {
    try {
      const auto link = objective.link_at(out.theta_hat);
      out.vcov = variance_plugin(sample, link, method, mask, config.leave_one_out);
      for (Eigen::Index j = 0; j < out.vcov.rows(); ++j)
        out.se.push_back(std::sqrt(std::max(0.0, out.vcov(j, j))));
      out.variance_ok = true;
    } catch (const Error& e) {
      out.variance_error = e.what();
    }
  }
  return out;
}

//! Estimated regression function x -> f-hat(theta-hat'x; theta-hat).
inline double
regression_estimate(std::span<const Observation> sample,
                    const FitResult& result,
                    std::span<const double> x,
                    const EstimatorConfig& config = {})
{
  const auto synthetic = synthetic_transform(sample);
  const double h = bandwidth(config.bandwidth, index_values(result.theta_hat, sample));
  const auto link = link_fit(result.theta_hat, synthetic, h, config.kernel);
  return link(result.theta_hat.dot(x));
}

} // namespace censim
