#pragma once

#include "error.hpp"
#include "index_param.hpp"
#include "survival.hpp"
#include "transform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace censim {

enum class KernelFamily
{
  triweight,
  biweight,
  epanechnikov
};

//! Symmetric compactly supported kernel on [-1, 1].
struct KernelSpec
{
  KernelFamily family = KernelFamily::triweight;

  //! K(u), K'(u) or K''(u) for order 0, 1, 2.
  double eval(double u, int order = 0) const
  {
    if (!(std::abs(u) < 1.0))
      return 0.0;
    const double w = 1.0 - u * u;
    switch (family) {
      case KernelFamily::triweight:
        if (order == 0)
          return 35.0 / 32.0 * w * w * w;
        if (order == 1)
          return -105.0 / 16.0 * u * w * w;
        return -105.0 / 16.0 * w * (1.0 - 5.0 * u * u);
      case KernelFamily::biweight:
        if (order == 0)
          return 15.0 / 16.0 * w * w;
        if (order == 1)
          return -15.0 / 4.0 * u * w;
        return -15.0 / 4.0 * (1.0 - 3.0 * u * u);
      case KernelFamily::epanechnikov:
        if (order == 0)
          return 0.75 * w;
        if (order == 1)
          return -1.5 * u;
        return -1.5;
    }
    return 0.0;
  }

  double operator()(double u) const { return eval(u, 0); }
};

inline double
kernel_eval(const KernelSpec& spec, double u, int order)
{
  if (order < 0 || order > 2)
    throw Error("kernel derivative order must be 0, 1 or 2");
  return spec.eval(u, order);
}

//! h = constant * sd(index) * (log n / n)^(1/5).
struct BandwidthRule
{
  double constant = 1.0;
};

inline double
sample_sd(std::span<const double> v)
{
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : v)
    ss += (a - mean) * (a - mean);
  return std::sqrt(ss / (n - 1.0));
}

inline double
bandwidth(const BandwidthRule& rule, std::span<const double> index_values)
{
  const std::size_t n = index_values.size();
  if (n < 2)
    throw Error("degenerate index");
  const double s = sample_sd(index_values);
  if (!(s > 0.0) || !(rule.constant > 0.0))
    throw Error("degenerate index");
  const double nd = static_cast<double>(n);
  return rule.constant * s * std::pow(std::log(nd) / nd, 0.2);
}

namespace detail {

// Sorted copy of index values for windowed kernel sums.
class SortedIndex
{
public:
  SortedIndex() = default;
  explicit SortedIndex(std::span<const double> v)
    : order_(v.size())
  {
    std::iota(order_.begin(), order_.end(), std::size_t{ 0 });
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    sorted_.resize(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
      sorted_[k] = v[order_[k]];
  }

  // Calls fn(original_index, value) for every value in the open window (u-h, u+h).
  template<class Fn>
  void for_window(double u, double h, Fn&& fn) const
  {
    auto it = std::upper_bound(sorted_.begin(), sorted_.end(), u - h);
    for (auto k = static_cast<std::size_t>(it - sorted_.begin());
         k < sorted_.size() && sorted_[k] < u + h; ++k)
      fn(order_[k], sorted_[k]);
  }

private:
  std::vector<std::size_t> order_;
  std::vector<double> sorted_;
};

} // namespace detail

//! Kernel density of theta'X evaluated at u.
inline double
index_density(const IndexParam& theta,
              std::span<const Observation> sample,
              double h,
              double u,
              const KernelSpec& kernel = {})
{
  if (!(h > 0.0))
    throw Error("bandwidth must be positive");
  double s = 0.0;
  for (const auto& o : sample)
    s += kernel((theta.dot(o.x) - u) / h);
  return s / (static_cast<double>(sample.size()) * h);
}

//! Density of theta'X at every sample point theta'X_i.
inline std::vector<double>
index_density_at_sample(const IndexParam& theta,
                        std::span<const Observation> sample,
                        double h,
                        const KernelSpec& kernel = {})
{
  if (!(h > 0.0))
    throw Error("bandwidth must be positive");
  const auto v = index_values(theta, sample);
  const detail::SortedIndex sorted(v);
  const double scale = 1.0 / (static_cast<double>(sample.size()) * h);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double s = 0.0;
    sorted.for_window(v[i], h, [&](std::size_t, double vj) { s += kernel((vj - v[i]) / h); });
    out[i] = s * scale;
  }
  return out;
}

struct LinkValue
{
  double value = 0.0;
  bool valid = false;
};

//! Kernel estimate u -> f-hat(u; theta) of E[Y* | theta'X = u]. The bandwidth
//! is fixed at construction.
class LinkEstimate
{
public:
  static constexpr double kDenominatorFloor = 1e-10;

  LinkEstimate(const IndexParam& theta,
               std::span<const Observation> sample,
               std::span<const double> responses,
               double h,
               const KernelSpec& kernel = {})
    : theta_(theta)
    , h_(h)
    , kernel_(kernel)
    , dim_(theta.dim())
    , y_(responses.begin(), responses.end())
  {
    if (!(h > 0.0))
      throw Error("bandwidth must be positive");
    if (sample.size() != responses.size())
      throw Error("responses and sample differ in length");
    if (sample.empty())
      throw Error("empty sample");
    x_.reserve(sample.size() * dim_);
    for (const auto& o : sample) {
      if (o.x.size() != dim_)
        throw Error("covariate dimension does not match index dimension");
      x_.insert(x_.end(), o.x.begin(), o.x.end());
    }
    v_ = index_values(theta, sample);
    sorted_ = detail::SortedIndex(v_);
    mean_ = std::accumulate(y_.begin(), y_.end(), 0.0) / static_cast<double>(y_.size());
  }

  const IndexParam& theta() const { return theta_; }
  double bandwidth() const { return h_; }
  const KernelSpec& kernel() const { return kernel_; }
  std::size_t size() const { return y_.size(); }
  double index_at(std::size_t k) const { return v_[k]; }
  std::span<const double> responses() const { return y_; }
  //! Mean response; the h -> infinity limit of the estimate.
  double response_mean() const { return mean_; }

  LinkValue evaluate(double u) const { return evaluate_impl(u, kNone); }

  //! f-hat(theta'X_k), optionally dropping observation k from the sums.
  LinkValue evaluate_at_sample(std::size_t k, bool leave_one_out) const
  {
    return evaluate_impl(v_[k], leave_one_out ? k : kNone);
  }

  double operator()(double u) const
  {
    const auto r = evaluate(u);
    if (!r.valid)
      throw Error("empty neighborhood");
    return r.value;
  }

  //! Gradient of theta -> f-hat(theta'x; theta) at fixed bandwidth.
  std::vector<double> gradient(std::span<const double> x) const
  {
    if (x.size() != dim_)
      throw Error("covariate dimension does not match index dimension");
    std::vector<double> g;
    if (!gradient_impl(x, theta_.dot(x), kNone, g))
      throw Error("empty neighborhood");
    return g;
  }

  //! Gradient at sample point k; returns false where the estimate is invalid.
  bool gradient_at_sample(std::size_t k, bool leave_one_out, std::vector<double>& g) const
  {
    return gradient_impl(std::span<const double>(x_.data() + k * dim_, dim_), v_[k],
                         leave_one_out ? k : kNone, g);
  }

private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  bool valid_denominator(double den) const
  {
    return den >= static_cast<double>(y_.size()) * h_ * kDenominatorFloor;
  }

  LinkValue evaluate_impl(double u, std::size_t skip) const
  {
    double num = 0.0, den = 0.0;
    sorted_.for_window(u, h_, [&](std::size_t i, double vi) {
      if (i == skip)
        return;
      const double k = kernel_((vi - u) / h_);
      num += k * y_[i];
      den += k;
    });
    if (!valid_denominator(den))
      return { 0.0, false };
    return { num / den, true };
  }

  bool gradient_impl(std::span<const double> x,
                     double u,
                     std::size_t skip,
                     std::vector<double>& g) const
  {
    g.assign(dim_, 0.0);
    std::vector<double> dnum(dim_, 0.0), dden(dim_, 0.0);
    double num = 0.0, den = 0.0;
    sorted_.for_window(u, h_, [&](std::size_t i, double vi) {
      if (i == skip)
        return;
      const double a = (vi - u) / h_;
      const double k0 = kernel_.eval(a, 0);
      const double k1 = kernel_.eval(a, 1) / h_;
      num += k0 * y_[i];
      den += k0;
      const double* xi = x_.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double d = k1 * (xi[j] - x[j]);
        dnum[j] += d * y_[i];
        dden[j] += d;
      }
    });
    if (!valid_denominator(den))
      return false;
    const double f = num / den;
    for (std::size_t j = 0; j < dim_; ++j)
      g[j] = (dnum[j] - f * dden[j]) / den;
    return true;
  }

  IndexParam theta_;
  double h_;
  KernelSpec kernel_;
  std::size_t dim_;
  std::vector<double> y_;
  std::vector<double> x_;
  std::vector<double> v_;
  detail::SortedIndex sorted_;
  double mean_ = 0.0;
};

//! Kernel link estimate trained on synthetic responses.
inline LinkEstimate
link_fit(const IndexParam& theta,
         const SyntheticSample& synthetic,
         double h,
         const KernelSpec& kernel = {})
{
  return LinkEstimate(theta, synthetic.observations, synthetic.y_star, h, kernel);
}

inline std::vector<double>
link_gradient(const LinkEstimate& estimate, std::span<const double> x)
{
  return estimate.gradient(x);
}

enum class TrimMode
{
  fixed_box,
  density
};

struct TrimmingSpec
{
  TrimMode mode = TrimMode::density;
  // Absolute density threshold c; unset means c = relative_threshold * max_i f-hat(theta'X_i).
  std::optional<double> threshold;
  double relative_threshold = 0.1;
  // Per-coordinate sample quantiles bounding the fixed box.
  double box_lower_quantile = 0.1;
  double box_upper_quantile = 0.9;
};

//! Fixed-box trimming with the default quantile range.
inline TrimmingSpec
box_trimming()
{
  TrimmingSpec spec;
  spec.mode = TrimMode::fixed_box;
  return spec;
}

struct CovariateBox
{
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> x) const
  {
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] < lower[j] || x[j] > upper[j])
        return false;
    return true;
  }
};

// Linear-interpolation sample quantile.
inline double
quantile(std::vector<double> v, double p)
{
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline CovariateBox
covariate_box(const TrimmingSpec& spec, std::span<const Observation> sample)
{
  if (sample.empty())
    throw Error("empty sample");
  const std::size_t d = sample.front().x.size();
  CovariateBox box;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
      col[i] = sample[i].x[j];
    box.lower.push_back(quantile(col, spec.box_lower_quantile));
    box.upper.push_back(quantile(col, spec.box_upper_quantile));
  }
  return box;
}

//! Indicator J for every sample point (1 = kept).
inline std::vector<char>
trimming_mask(const TrimmingSpec& spec,
              const IndexParam& theta,
              std::span<const Observation> sample,
              double h,
              const KernelSpec& kernel = {})
{
  std::vector<char> mask(sample.size(), 0);
  if (spec.mode == TrimMode::fixed_box) {
    const auto box = covariate_box(spec, sample);
    for (std::size_t i = 0; i < sample.size(); ++i)
      mask[i] = box.contains(sample[i].x) ? 1 : 0;
    return mask;
  }
  const auto dens = index_density_at_sample(theta, sample, h, kernel);
  const double c = spec.threshold ? *spec.threshold
                                  : spec.relative_threshold *
                                      *std::max_element(dens.begin(), dens.end());
  for (std::size_t i = 0; i < sample.size(); ++i)
    mask[i] = dens[i] >= c ? 1 : 0;
  return mask;
}

//! Indicator J at an arbitrary covariate value x, with the box or threshold
//! derived from the sample.
inline int
trimming_indicator(const TrimmingSpec& spec,
                   const IndexParam& theta,
                   std::span<const Observation> sample,
                   double h,
                   std::span<const double> x,
                   const KernelSpec& kernel = {})
{
  if (spec.mode == TrimMode::fixed_box)
    return covariate_box(spec, sample).contains(x) ? 1 : 0;
  double c = 0.0;
  if (spec.threshold) {
    c = *spec.threshold;
  } else {
    const auto dens = index_density_at_sample(theta, sample, h, kernel);
    c = spec.relative_threshold * *std::max_element(dens.begin(), dens.end());
  }
  return index_density(theta, sample, h, theta.dot(x), kernel) >= c ? 1 : 0;
}

} // namespace censim
