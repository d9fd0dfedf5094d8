#pragma once

#include "error.hpp"
#include "survival.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace censim {

//! Single-index direction with the first coordinate pinned to 1.
class IndexParam
{
public:
  explicit IndexParam(std::vector<double> theta)
    : theta_(std::move(theta))
  {
    if (theta_.empty() || theta_[0] != 1.0)
      throw Error("index parameter must have first coordinate equal to 1");
  }

  //! Build (1, free...) from the d-1 free coordinates.
  static IndexParam from_free(std::span<const double> free)
  {
    std::vector<double> theta(free.size() + 1, 1.0);
    std::copy(free.begin(), free.end(), theta.begin() + 1);
    return IndexParam(std::move(theta));
  }

  std::size_t dim() const { return theta_.size(); }
  std::size_t free_dim() const { return theta_.size() - 1; }
  double operator[](std::size_t j) const { return theta_[j]; }
  const std::vector<double>& values() const { return theta_; }
  std::vector<double> free() const { return { theta_.begin() + 1, theta_.end() }; }

  double dot(std::span<const double> x) const
  {
    if (x.size() != theta_.size())
      throw Error("covariate dimension does not match index dimension");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
      s += theta_[j] * x[j];
    return s;
  }

  friend bool operator==(const IndexParam&, const IndexParam&) = default;

private:
  std::vector<double> theta_;
};

//! Projections theta'X_i for every observation.
inline std::vector<double>
index_values(const IndexParam& theta, std::span<const Observation> sample)
{
  std::vector<double> v(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    v[i] = theta.dot(sample[i].x);
  return v;
}

inline double
squared_distance(const IndexParam& a, const IndexParam& b)
{
  double s = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j)
    s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

} // namespace censim
