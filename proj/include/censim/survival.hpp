#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace censim {

//! One right-censored observation: t = min(Y, C), delta = 1{Y <= C}.
struct Observation
{
  double t = 0.0;
  bool delta = true;
  std::vector<double> x;
};

using Sample = std::vector<Observation>;

//! Anything that can be queried as a distribution function with left limits.
template<class D>
concept CdfLike = requires(const D& d, double t) {
  { d.value(t) } -> std::convertible_to<double>;
  { d.value_minus(t) } -> std::convertible_to<double>;
};

//! Right-continuous step distribution function with finitely many jumps.
class StepCdf
{
public:
  StepCdf() = default;

  StepCdf(std::vector<double> jump_times, std::vector<double> cum_mass)
    : jump_times_(std::move(jump_times))
    , cum_mass_(std::move(cum_mass))
  {
    if (jump_times_.size() != cum_mass_.size())
      throw Error("StepCdf: jump_times and cum_mass differ in length");
    for (std::size_t k = 1; k < jump_times_.size(); ++k) {
      if (!(jump_times_[k] > jump_times_[k - 1]))
        throw Error("StepCdf: jump times must be strictly increasing");
      if (cum_mass_[k] < cum_mass_[k - 1])
        throw Error("StepCdf: cumulative mass must be nondecreasing");
    }
  }

  //! F(t): cumulative mass at the largest jump time <= t.
  double value(double t) const
  {
    auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
    if (it == jump_times_.begin())
      return 0.0;
    return cum_mass_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
  }

  //! F(t-): cumulative mass at the largest jump time < t.
  double value_minus(double t) const
  {
    auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
    if (it == jump_times_.begin())
      return 0.0;
    return cum_mass_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
  }

  //! Mass of the k-th jump.
  double jump_mass(std::size_t k) const
  {
    return k == 0 ? cum_mass_[0] : cum_mass_[k] - cum_mass_[k - 1];
  }

  double total_mass() const { return cum_mass_.empty() ? 0.0 : cum_mass_.back(); }
  std::size_t size() const { return jump_times_.size(); }
  bool empty() const { return jump_times_.empty(); }
  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<double>& cum_mass() const { return cum_mass_; }

private:
  std::vector<double> jump_times_;
  std::vector<double> cum_mass_;
};

//! Continuous distribution function given in closed form (left limit == value).
class FunctionCdf
{
public:
  explicit FunctionCdf(std::function<double(double)> cdf)
    : cdf_(std::move(cdf))
  {}

  double value(double t) const { return cdf_(t); }
  double value_minus(double t) const { return cdf_(t); }

private:
  std::function<double(double)> cdf_;
};

//! Observations paired with their Kaplan-Meier masses.
struct WeightedSample
{
  std::vector<Observation> observations;
  std::vector<double> weights;

  std::size_t size() const { return observations.size(); }
  double total_mass() const
  {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
  }
};

enum class KmTarget
{
  event,
  censoring
};

namespace detail {

// Indices sorted by time; at equal times uncensored observations come first.
inline std::vector<std::size_t>
time_order(std::span<const Observation> sample)
{
  std::vector<std::size_t> idx(sample.size());
  std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (sample[a].t != sample[b].t)
      return sample[a].t < sample[b].t;
    return sample[a].delta && !sample[b].delta;
  });
  return idx;
}

struct TimeGroup
{
  double t;
  std::size_t begin; // position in the sorted order
  std::size_t events;
  std::size_t censored;
};

inline std::vector<TimeGroup>
group_times(std::span<const Observation> sample,
            const std::vector<std::size_t>& order)
{
  std::vector<TimeGroup> groups;
  for (std::size_t k = 0; k < order.size();) {
    TimeGroup g{ sample[order[k]].t, k, 0, 0 };
    while (k < order.size() && sample[order[k]].t == g.t) {
      if (sample[order[k]].delta)
        ++g.events;
      else
        ++g.censored;
      ++k;
    }
    groups.push_back(g);
  }
  return groups;
}

inline void
require_nonempty(std::span<const Observation> sample)
{
  if (sample.empty())
    throw Error("empty sample");
}

} // namespace detail

//! Product-limit estimate of the event law F (target = event) or of the
//! censoring law G (target = censoring). Events precede censorings at tied
//! times, so a censoring at t does not see the events at t in its risk set.
inline StepCdf
km_fit(std::span<const Observation> sample, KmTarget target)
{
  detail::require_nonempty(sample);
  const auto order = detail::time_order(sample);
  const auto groups = detail::group_times(sample, order);
  const double n = static_cast<double>(sample.size());

  std::vector<double> times, mass;
  double survival = 1.0;
  // Until the first censoring the event curve is the empirical CDF; counts
  // keep it exact there.
  bool counting = target == KmTarget::event;
  for (const auto& g : groups) {
    const double at_risk = n - static_cast<double>(g.begin);
    double failures = 0.0, risk = at_risk;
    if (target == KmTarget::event) {
      failures = static_cast<double>(g.events);
    } else {
      failures = static_cast<double>(g.censored);
      risk = at_risk - static_cast<double>(g.events);
    }
    if (failures > 0.0) {
      times.push_back(g.t);
      if (counting) {
        const auto done = g.begin + g.events;
        survival = static_cast<double>(sample.size() - done) / n;
        mass.push_back(static_cast<double>(done) / n);
      } else {
        survival *= 1.0 - failures / risk;
        mass.push_back(1.0 - survival);
      }
    }
    if (g.censored > 0)
      counting = false;
  }
  return StepCdf(std::move(times), std::move(mass));
}

//! Empirical distribution function of the observed times.
inline StepCdf
empirical_cdf(std::span<const Observation> sample)
{
  detail::require_nonempty(sample);
  const auto order = detail::time_order(sample);
  const auto groups = detail::group_times(sample, order);
  const double n = static_cast<double>(sample.size());
  std::vector<double> times, mass;
  for (const auto& g : groups) {
    times.push_back(g.t);
    mass.push_back(static_cast<double>(g.begin + g.events + g.censored) / n);
  }
  return StepCdf(std::move(times), std::move(mass));
}

//! Kaplan-Meier masses W_in: the jump of F-hat at each uncensored time,
//! split evenly across tied uncensored observations.
inline WeightedSample
km_weights(std::span<const Observation> sample)
{
  detail::require_nonempty(sample);
  const auto order = detail::time_order(sample);
  const auto groups = detail::group_times(sample, order);
  const double n = static_cast<double>(sample.size());

  WeightedSample out;
  out.observations.assign(sample.begin(), sample.end());
  out.weights.assign(sample.size(), 0.0);

  double survival = 1.0;
  bool counting = true; // no censoring seen yet: every jump is exactly 1/n
  for (const auto& g : groups) {
    if (g.events > 0) {
      const double at_risk = n - static_cast<double>(g.begin);
      double next = 0.0, share = 0.0;
      if (counting) {
        next = static_cast<double>(sample.size() - g.begin - g.events) / n;
        share = 1.0 / n;
      } else {
        next = survival * (1.0 - static_cast<double>(g.events) / at_risk);
        share = (survival - next) / static_cast<double>(g.events);
      }
      // events occupy the leading slots of the group
      for (std::size_t k = g.begin; k < g.begin + g.events; ++k)
        out.weights[order[k]] = share;
      survival = next;
    }
    if (g.censored > 0)
      counting = false;
  }
  return out;
}

//! Inverse-probability weights W_i* = delta_i / (n (1 - G(T_i-))) under a
//! known censoring law.
template<CdfLike Cdf>
WeightedSample
ideal_weights(std::span<const Observation> sample, const Cdf& g_true)
{
  detail::require_nonempty(sample);
  const double n = static_cast<double>(sample.size());
  WeightedSample out;
  out.observations.assign(sample.begin(), sample.end());
  out.weights.assign(sample.size(), 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample[i].delta)
      continue;
    const double surv = 1.0 - g_true.value_minus(sample[i].t);
    if (!(surv > 0.0))
      throw Error("weight singularity");
    out.weights[i] = 1.0 / (n * surv);
  }
  return out;
}

struct CIntegral
{
  double value = 0.0;
  bool truncated = false; // a jump with 1 - H(s) = 0 or 1 - G(s) = 0 was dropped
};

namespace detail {

template<class Include>
CIntegral
c_integral_impl(const StepCdf& g_hat, const StepCdf& h_hat, Include include)
{
  CIntegral out;
  const auto& times = g_hat.jump_times();
  for (std::size_t k = 0; k < times.size() && include(times[k]); ++k) {
    const double surv_h = 1.0 - h_hat.value(times[k]);
    const double surv_g = 1.0 - g_hat.cum_mass()[k];
    if (!(surv_h > 0.0) || !(surv_g > 0.0)) {
      out.truncated = true;
      break;
    }
    out.value += g_hat.jump_mass(k) / (surv_h * surv_g);
  }
  return out;
}

} // namespace detail

//! Plug-in C(y) = sum over jumps s <= y of dG(s) / ((1 - H(s)) (1 - G(s))).
inline CIntegral
c_integral(const StepCdf& g_hat, const StepCdf& h_hat, double y)
{
  return detail::c_integral_impl(g_hat, h_hat, [y](double s) { return s <= y; });
}

//! Left limit C(y-): same sum restricted to s < y.
inline CIntegral
c_integral_minus(const StepCdf& g_hat, const StepCdf& h_hat, double y)
{
  return detail::c_integral_impl(g_hat, h_hat, [y](double s) { return s < y; });
}

//! Fraction of censored observations.
inline double
censoring_fraction(std::span<const Observation> sample)
{
  if (sample.empty())
    return 0.0;
  const auto censored = std::count_if(sample.begin(), sample.end(),
                                      [](const Observation& o) { return !o.delta; });
  return static_cast<double>(censored) / static_cast<double>(sample.size());
}

} // namespace censim
