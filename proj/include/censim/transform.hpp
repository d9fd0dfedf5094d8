#pragma once

#include "survival.hpp"

#include <optional>
#include <span>
#include <vector>

namespace censim {

//! Observations with their synthetic responses Y*_i = delta_i T_i / (1 - G(T_i-)).
struct SyntheticSample
{
  std::vector<Observation> observations;
  std::vector<double> y_star;

  std::size_t size() const { return observations.size(); }
};

struct TransformOptions
{
  // Diagnostics only: clamp |Y*| to this value. Unset means no capping.
  std::optional<double> cap;
};

//! Koul-Susarla-Van Ryzin transform. Pass the Kaplan-Meier G-hat for the
//! feasible responses, or the true censoring law for the oracle Y*.
template<CdfLike Cdf>
SyntheticSample
synthetic_transform(std::span<const Observation> sample,
                    const Cdf& g,
                    const TransformOptions& opts = {})
{
  SyntheticSample out;
  out.observations.assign(sample.begin(), sample.end());
  out.y_star.assign(sample.size(), 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample[i].delta)
      continue;
    const double surv = 1.0 - g.value_minus(sample[i].t);
    if (!(surv > 0.0))
      throw Error("weight singularity");
    double y = sample[i].t / surv;
    if (opts.cap)
      y = std::clamp(y, -*opts.cap, *opts.cap);
    out.y_star[i] = y;
  }
  return out;
}

//! Feasible transform with G-hat = km_fit(sample, censoring).
inline SyntheticSample
synthetic_transform(std::span<const Observation> sample,
                    const TransformOptions& opts = {})
{
  return synthetic_transform(sample, km_fit(sample, KmTarget::censoring), opts);
}

} // namespace censim
