// Finite-sample claims checked by simulation. Each test fixes its seed, so
// the outcome is reproducible; thresholds are the ones the claims state.
#include <censim/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace censim;

namespace {

Objective
box_objective(const WeightedSample& w,
              const SyntheticSample& s,
              Method m,
              const EstimatorConfig& cfg)
{
  auto mask = trimming_mask(box_trimming(), IndexParam({ 1.0, 0.0 }),
                            s.observations, 1.0);
  return Objective(w, s, std::move(mask), m, cfg);
}

double
config_two_rate_for_30_percent()
{
  return calibrate_censoring(2, 0.30, 1);
}

} // namespace

TEST(MonteCarlo, CriterionSeparatesTruthFromNull)
{
  const EstimatorConfig cfg;
  const double lambda = config_two_rate_for_30_percent();
  int wins = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    auto rng = replication_stream(101, r);
    const auto d = dgp_sample(2, lambda, 100, rng);
    const auto w = km_weights(d.observations);
    const auto s = synthetic_transform(d.observations);
    auto o = box_objective(w, s, Method::wls, cfg);
    wins += o(IndexParam({ 1.0, 2.0 })) < o(IndexParam({ 1.0, 0.0 }));
  }
  RecordProperty("wins_of_200", wins);
  EXPECT_GE(wins, 190);
}

TEST(MonteCarlo, SdAndWlsGridMinimizersAgree)
{
  const EstimatorConfig cfg;
  auto rng = replication_stream(102, 0);
  const auto d = dgp_sample(3, 2.0, 200, rng);
  const auto w = km_weights(d.observations);
  const auto s = synthetic_transform(d.observations);
  auto wls = box_objective(w, s, Method::wls, cfg);
  auto sd = box_objective(w, s, Method::sd, cfg);
  const double step = 0.05;
  int arg_wls = 0, arg_sd = 0;
  double best_wls = INFINITY, best_sd = INFINITY;
  for (int k = 0; k <= 120; ++k) {
    const IndexParam th({ 1.0, -1.0 + step * k });
    const double a = wls.safe(th), b = sd.safe(th);
    if (a < best_wls) {
      best_wls = a;
      arg_wls = k;
    }
    if (b < best_sd) {
      best_sd = b;
      arg_sd = k;
    }
  }
  RecordProperty("argmin_wls", std::to_string(-1.0 + step * arg_wls));
  RecordProperty("argmin_sd", std::to_string(-1.0 + step * arg_sd));
  EXPECT_LE(std::abs(arg_wls - arg_sd), 1);
}

TEST(MonteCarlo, PreliminaryEstimatorConfigOne)
{
  const EstimatorConfig cfg;
  const SearchRegion region(IndexParam({ 1.0, 0.0 }), cfg.default_search_radius);
  std::vector<double> err(100);
  parallel_for(err.size(), worker_count(0), [&](std::size_t r) {
    auto rng = replication_stream(103, r);
    const auto d = dgp_sample(1, 2.4, 100, rng);
    const auto th = preliminary_fit(d.observations, Method::wls,
                                    box_trimming(), region, cfg);
    err[r] = std::sqrt(squared_distance(th, true_theta(1)));
  });
  RecordProperty("median_error", std::to_string(median(err)));
  EXPECT_LT(median(err), 0.5);
}

TEST(MonteCarlo, ConfigTwoMseWithinTenfoldOfTarget)
{
  SimulationConfig c;
  c.config_id = 2;
  c.censoring_target = 0.30;
  c.n = 100;
  c.replications = 200;
  c.seed = 104;
  c.methods = { Method::wls };
  const auto rep = run_monte_carlo(c);
  const double mse = rep.methods[0].mse;
  RecordProperty("mse", std::to_string(mse));
  EXPECT_GT(mse, 7.718e-3 / 10.0);
  EXPECT_LT(mse, 7.718e-3 * 10.0);
}

TEST(MonteCarlo, ConfigTwoMseFallsFromFiftyToHundred)
{
  SimulationConfig c;
  c.config_id = 2;
  c.censoring_target = 0.30;
  c.replications = 200;
  c.seed = 105;
  c.n = 50;
  const auto small = run_monte_carlo(c);
  c.n = 100;
  const auto large = run_monte_carlo(c);
  for (std::size_t k = 0; k < 2; ++k) {
    RecordProperty(std::string(to_string(c.methods[k])) + "_mse50",
                   std::to_string(small.methods[k].mse));
    RecordProperty(std::string(to_string(c.methods[k])) + "_mse100",
                   std::to_string(large.methods[k].mse));
    EXPECT_LT(large.methods[k].mse, small.methods[k].mse) << to_string(c.methods[k]);
  }
}

TEST(MonteCarlo, MedianErrorFallsWithNInConfigsOneAndThree)
{
  for (int id : { 1, 3 }) {
    SimulationConfig c;
    c.config_id = id;
    c.censoring_param = id == 1 ? 2.4 : 2.0;
    c.replications = 200;
    c.seed = 106;
    std::vector<std::vector<double>> med(2);
    for (int n : { 50, 100, 200, 400 }) {
      c.n = n;
      const auto rep = run_monte_carlo(c);
      for (std::size_t k = 0; k < 2; ++k)
        med[k].push_back(rep.methods[k].median_error);
    }
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 1; j < med[k].size(); ++j)
        EXPECT_LT(med[k][j], med[k][j - 1])
          << "config " << id << " " << to_string(c.methods[k]) << " step " << j;
  }
}
