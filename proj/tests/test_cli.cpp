#include <censim/cli.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace censim;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  int code;
  std::string out;
  std::string err;
};

Outcome
invoke(std::vector<std::string> args)
{
  args.insert(args.begin(), "censim");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return { code, out.str(), err.str() };
}

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() /
           ("censim_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& body)
  {
    const auto p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  std::string write_sample(const std::string& name, const Sample& s)
  {
    std::ostringstream os;
    write_dataset(os, s);
    return write(name, os.str());
  }

  fs::path dir_;
};

Sample
config_two(std::uint64_t seed, int n)
{
  auto rng = replication_stream(seed, 0);
  return dgp_sample(2, 0.2, n, rng).observations;
}

} // namespace

TEST_F(CliTest, FitEmitsJsonContract)
{
  const auto path = write_sample("d.csv", config_two(42, 80));
  const auto r = invoke({ "fit", "--input", path });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* key : { "theta_hat", "se", "converged", "censoring_fraction",
                           "trimmed_fraction", "vcov", "criterion_value" })
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["theta_hat"].size(), 2u);
  EXPECT_EQ(j["theta_hat"][0].get<double>(), 1.0);
}

TEST_F(CliTest, FitTableOutput)
{
  const auto path = write_sample("d.csv", config_two(42, 80));
  const auto r = invoke({ "fit", "--input", path, "--method", "sd", "--output", "table" });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("SD"), std::string::npos);
  EXPECT_NE(r.out.find("x2"), std::string::npos);
}

TEST_F(CliTest, BadDeltaCitesLine)
{
  std::string body = "t,delta,x1,x2\n";
  for (int i = 2; i <= 10; ++i)
    body += std::to_string(i) + "," + (i == 7 ? "2" : "1") + ",0.5,0.25\n";
  const auto r = invoke({ "fit", "--input", write("bad.csv", body) });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 7"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFileAndBadHeader)
{
  EXPECT_EQ(invoke({ "fit", "--input", (dir_ / "nope.csv").string() }).code, 2);
  const auto r = invoke({ "fit", "--input", write("h.csv", "time,delta,x1\n1,1,0\n") });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  const auto c = invoke({ "fit", "--input", write("c.csv", "t,delta,x1\n1,1,0\n2,1\n") });
  EXPECT_EQ(c.code, 2);
  EXPECT_NE(c.err.find("line 3"), std::string::npos);
}

TEST_F(CliTest, FitFailureExitsThree)
{
  const auto r = invoke({ "fit", "--input", write("s.csv", "t,delta,x1,x2\n1,1,0,0\n2,0,1,1\n") });
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, RoundTripMatchesInProcessFit)
{
  const auto s = config_two(42, 120);
  const auto path = write_sample("rt.csv", s);
  const auto r = invoke({ "fit", "--input", path, "--seed", "7", "--bandwidth-const", "1.2" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto direct = fit(s, Method::wls, cli::estimator_config(1.2, 0.1, 7));
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["theta_hat"].get<std::vector<double>>(), direct.theta_hat.values());
}

TEST_F(CliTest, KmThreePoint)
{
  const auto path = write("k.csv", "t,delta,x1\n1,1,0\n2,0,0\n3,1,0\n");
  const auto r = invoke({ "km", "--input", path });
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string header, a, b, extra;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  EXPECT_EQ(header, "time,cdf");
  EXPECT_EQ(a.substr(0, 14), "1,0.3333333333");
  EXPECT_EQ(b, "3,1");
  EXPECT_FALSE(std::getline(in, extra));

  const auto g = invoke({ "km", "--input", path, "--target", "censoring" });
  EXPECT_EQ(g.out, "time,cdf\n2,0.5\n");
}

TEST_F(CliTest, KmAllCensoredWarns)
{
  const auto r = invoke({ "km", "--input", write("c.csv", "t,delta,x1\n1,0,0\n2,0,0\n") });
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "time,cdf\n");
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(CliTest, KmOutputReingests)
{
  const auto s = config_two(5, 200);
  const auto r = invoke({ "km", "--input", write_sample("s.csv", s) });
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  const auto back = read_step_cdf(in);
  const auto f = km_fit(s, KmTarget::event);
  ASSERT_EQ(back.size(), f.size());
  for (double t : f.jump_times()) {
    EXPECT_EQ(back.value(t), f.value(t));
    EXPECT_EQ(back.value_minus(t), f.value_minus(t));
  }
}

TEST_F(CliTest, SimulateRejectsUnknownConfig)
{
  EXPECT_EQ(invoke({ "simulate", "--config", "9", "--reps", "1" }).code, 2);
  EXPECT_EQ(invoke({ "simulate", "--config", "2", "--cens-param", "0.1", "--cens-target", "0.3" })
              .code,
            2);
  EXPECT_EQ(invoke({ "bogus" }).code, 2);
}

TEST_F(CliTest, SimulateSingleReplicationIsByteIdentical)
{
  const std::vector<std::string> args{ "simulate", "--config", "2", "--n", "50", "--reps", "1",
                                       "--seed", "3" };
  const auto a = invoke(args), b = invoke(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  auto json_args = args;
  json_args.insert(json_args.end(), { "--output", "json", "--methods", "sd" });
  const auto j = nlohmann::json::parse(invoke(json_args).out);
  EXPECT_EQ(j[0]["methods"].size(), 1u);
  EXPECT_EQ(j[0]["methods"][0]["method"], "SD");
}

TEST_F(CliTest, SimulateAcceptsCensoringTarget)
{
  const auto r = invoke({ "simulate", "--config", "2", "--cens-target", "0.3", "--n", "40,60",
                          "--reps", "2", "--output", "json" });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["n"], 60);
  EXPECT_NEAR(j[0]["censoring_target"].get<double>(), 0.3, 1e-12);
}

TEST(DatasetIo, WriteThenReadIsExact)
{
  const auto s = config_two(8, 30);
  std::stringstream io;
  write_dataset(io, s);
  const auto back = read_dataset(io);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].t, s[i].t);
    EXPECT_EQ(back[i].delta, s[i].delta);
    EXPECT_EQ(back[i].x, s[i].x);
  }
}

TEST(DatasetIo, AcceptsBomAndBlankLines)
{
  std::istringstream in("\xEF\xBB\xBFt,delta,x1\r\n\r\n1.5,1,2\n+2,0,-1e-3\n");
  const auto s = read_dataset(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].t, 2.0);
  EXPECT_FALSE(s[1].delta);
  EXPECT_EQ(s[1].x[0], -1e-3);
}

TEST(DatasetIo, RejectsNonFinite)
{
  std::istringstream in("t,delta,x1\ninf,1,0\n");
  EXPECT_THROW(read_dataset(in), ParseError);
}
