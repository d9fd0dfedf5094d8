#include <censim/simulate.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace censim;

TEST(Dgp, ConfigThreeIndexRange)
{
  auto rng = replication_stream(60, 0);
  const auto d = dgp_sample(3, 2.0, 5000, rng);
  const auto theta = true_theta(3);
  EXPECT_EQ(theta, IndexParam({ 1.0, 2.0 }));
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& o : d.observations) {
    EXPECT_TRUE(o.x[0] == 0.0 || o.x[0] == 1.0);
    const double u = theta.dot(o.x);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_GE(lo, -2.0);
  EXPECT_LE(hi, 3.0);
  EXPECT_LT(lo, -1.9);
  EXPECT_GT(hi, 2.9);
}

TEST(Dgp, ObservedIsMinimumOfLatent)
{
  for (int id = 1; id <= 3; ++id) {
    auto rng = replication_stream(61, static_cast<std::uint64_t>(id));
    const auto d = dgp_sample(id, id == 1 ? 2.4 : 0.2, 300, rng);
    for (std::size_t i = 0; i < d.observations.size(); ++i) {
      const auto& o = d.observations[i];
      EXPECT_EQ(o.t, std::min(d.latent_y[i], d.latent_c[i]));
      EXPECT_EQ(o.delta, d.latent_y[i] <= d.latent_c[i]);
      EXPECT_EQ(o.x.size(), 2u);
    }
  }
}

TEST(Dgp, VanishingRateRemovesCensoring)
{
  for (int id : { 2, 3 }) {
    auto rng = replication_stream(62, 0);
    EXPECT_EQ(censoring_fraction(dgp_sample(id, 1e-9, 2000, rng).observations), 0.0);
  }
}

TEST(Dgp, CensoringMonotoneInParameter)
{
  for (int id = 1; id <= 3; ++id) {
    double prev = id == 1 ? 1.0 : 0.0;
    for (double p : { 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0 }) {
      const double c = pilot_censoring(id, p, 10000, 7);
      if (id == 1) {
        EXPECT_LE(c, prev);
      } else {
        EXPECT_GE(c, prev);
      }
      prev = c;
    }
  }
}

TEST(Calibration, HitsTargetWithinThreePercent)
{
  for (double target : { 0.15, 0.30, 0.50 }) {
    const double lambda = calibrate_censoring(2, target, 3);
    // measured on fresh draws, not the pilot stream
    auto rng = replication_stream(63, static_cast<std::uint64_t>(target * 100));
    const double frac = censoring_fraction(dgp_sample(2, lambda, 10000, rng).observations);
    EXPECT_NEAR(frac, target, 0.03);
  }
  EXPECT_THROW(calibrate_censoring(2, 1.5, 3), Error);
}

TEST(Streams, DeterministicPerSeedAndReplication)
{
  auto a = replication_stream(5, 17), b = replication_stream(5, 17), c = replication_stream(5, 18),
       e = replication_stream(6, 17);
  const auto va = a(), vb = b(), vc = c(), ve = e();
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_NE(va, ve);
}

TEST(Streams, PairwiseUncorrelated)
{
  const int streams = 20, len = 2000;
  std::vector<std::vector<double>> u(streams);
  for (int r = 0; r < streams; ++r) {
    auto g = replication_stream(64, static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < len; ++k)
      u[r].push_back(unit(g));
  }
  // |corr| of independent uniforms has sd 1/sqrt(len); 5 sd is far out
  const double bound = 5.0 / std::sqrt(static_cast<double>(len));
  for (int a = 0; a < streams; ++a)
    for (int b = a + 1; b < streams; ++b) {
      double sab = 0.0, sa = 0.0, sb = 0.0;
      for (int k = 0; k < len; ++k) {
        sab += (u[a][k] - 0.5) * (u[b][k] - 0.5);
        sa += (u[a][k] - 0.5) * (u[a][k] - 0.5);
        sb += (u[b][k] - 0.5) * (u[b][k] - 0.5);
      }
      EXPECT_LT(std::abs(sab / std::sqrt(sa * sb)), bound);
    }
}

TEST(IdealWeights, KaplanMeierApproachesOracleWithN)
{
  std::vector<double> med;
  for (int n : { 50, 200, 800 }) {
    std::vector<double> dev;
    for (std::uint64_t r = 0; r < 40; ++r) {
      auto rng = replication_stream(65, r);
      const auto d = dgp_sample(2, 0.2, n, rng);
      const auto km = km_weights(d.observations);
      const auto ideal = ideal_weights(d.observations, censoring_law(2, 0.2));
      double m = 0.0;
      for (std::size_t i = 0; i < km.weights.size(); ++i)
        m = std::max(m, std::abs(km.weights[i] - ideal.weights[i]));
      dev.push_back(m);
    }
    med.push_back(median(dev));
  }
  EXPECT_LT(med[1], med[0]);
  EXPECT_LT(med[2], med[1]);
}

TEST(Harness, SingleReplicationIsReproducible)
{
  SimulationConfig c;
  c.config_id = 2;
  c.censoring_param = 0.2;
  c.n = 60;
  c.replications = 1;
  c.seed = 123;
  const auto a = to_json(run_monte_carlo(c)).dump();
  const auto b = to_json(run_monte_carlo(c)).dump();
  EXPECT_EQ(a, b);
}

TEST(Harness, ThreadCountDoesNotChangeReport)
{
  SimulationConfig c;
  c.config_id = 3;
  c.censoring_param = 2.0;
  c.n = 50;
  c.replications = 8;
  c.seed = 9;
  c.threads = 1;
  const auto one = to_json(run_monte_carlo(c)).dump();
  c.threads = 4;
  EXPECT_EQ(one, to_json(run_monte_carlo(c)).dump());
}

TEST(Harness, ReportFieldsAreSane)
{
  SimulationConfig c;
  c.config_id = 1;
  c.censoring_param = 2.4;
  c.n = 60;
  c.replications = 6;
  c.seed = 4;
  const auto rep = run_monte_carlo(c);
  EXPECT_EQ(rep.methods.size(), 2u);
  EXPECT_GE(rep.mean_censoring_fraction, 0.0);
  EXPECT_LE(rep.mean_censoring_fraction, 1.0);
  for (const auto& m : rep.methods) {
    EXPECT_GE(m.mse, 0.0);
    EXPECT_GE(m.median_error, 0.0);
    EXPECT_EQ(m.coverage.size(), 1u);
  }
  const auto table = format_table({ rep });
  EXPECT_NE(table.find("WLS"), std::string::npos);
  EXPECT_NE(table.find("n=60"), std::string::npos);
}

TEST(Harness, ValidationRejectsBadConfigs)
{
  SimulationConfig c;
  c.config_id = 9;
  EXPECT_THROW(validate(c), Error);
  c.config_id = 2;
  c.n = 10;
  EXPECT_THROW(validate(c), Error);
  c.n = 50;
  c.censoring_param = -1.0;
  EXPECT_THROW(validate(c), Error);
  c.censoring_param = 1.0;
  c.methods.clear();
  EXPECT_THROW(validate(c), Error);
}

TEST(Harness, MedianHandlesEvenAndOdd)
{
  EXPECT_DOUBLE_EQ(median({ 3.0, 1.0, 2.0 }), 2.0);
  EXPECT_DOUBLE_EQ(median({ 4.0, 1.0, 3.0, 2.0 }), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}
