#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace censim {

struct NelderMeadOptions
{
  double f_tolerance = 1e-8; // spread of simplex values
  double x_tolerance = 1e-6; // sup-norm simplex diameter
  int max_evaluations = 500;
};

struct NelderMeadResult
{
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

//! Derivative-free simplex minimization. The objective may return +inf to
//! mark infeasible points; such vertices are never accepted over finite ones.
inline NelderMeadResult
nelder_mead(const std::function<double(const std::vector<double>&)>& f,
            const std::vector<double>& start,
            const std::vector<double>& step,
            const NelderMeadOptions& opts = {})
{
  const std::size_t n = start.size();
  NelderMeadResult res;
  if (n == 0) {
    res.x = start;
    res.value = f(start);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }

  std::vector<std::vector<double>> x(n + 1, start);
  for (std::size_t i = 0; i < n; ++i)
    x[i + 1][i] += step[i];
  std::vector<double> fx(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& p) {
    ++evals;
    return f(p);
  };
  for (std::size_t i = 0; i <= n; ++i)
    fx[i] = eval(x[i]);

  std::vector<std::size_t> idx(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  bool converged = false;

  auto diameter = [&]() {
    double d = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d = std::max(d, std::abs(x[i][j] - x[0][j]));
    return d;
  };

  while (true) {
    std::iota(idx.begin(), idx.end(), std::size_t{ 0 });
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    {
      // keep storage ordered best..worst
      std::vector<std::vector<double>> xs(n + 1);
      std::vector<double> fs(n + 1);
      for (std::size_t i = 0; i <= n; ++i) {
        xs[i] = x[idx[i]];
        fs[i] = fx[idx[i]];
      }
      x.swap(xs);
      fx.swap(fs);
    }

    if (std::isfinite(fx[n]) && std::abs(fx[n] - fx[0]) <= opts.f_tolerance &&
        diameter() <= opts.x_tolerance) {
      converged = true;
      break;
    }
    if (evals >= opts.max_evaluations)
      break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        centroid[j] += x[i][j] / static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j)
      xr[j] = centroid[j] + (centroid[j] - x[n][j]);
    const double fr = eval(xr);

    if (fr < fx[0]) {
      for (std::size_t j = 0; j < n; ++j)
        xe[j] = centroid[j] + 2.0 * (centroid[j] - x[n][j]);
      const double fe = eval(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
      continue;
    }
    if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
      continue;
    }
    const bool outside = fr < fx[n];
    for (std::size_t j = 0; j < n; ++j)
      xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j])
                      : centroid[j] + 0.5 * (x[n][j] - centroid[j]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fx[n])) {
      x[n] = xc;
      fx[n] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        x[i][j] = x[0][j] + 0.5 * (x[i][j] - x[0][j]);
      fx[i] = eval(x[i]);
    }
  }

  res.x = x[0];
  res.value = fx[0];
  res.evaluations = evals;
  res.converged = converged;
  return res;
}

} // namespace censim
