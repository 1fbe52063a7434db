#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "biggp/gp.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using namespace biggp;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("biggp-cli-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Exponential-kernel data set, x in [0, 10].
  std::string gp_data(int n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::normal_distribution<double> z;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = u(gen);
    Matrix c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = std::exp(-std::abs(x[i] - x[j])) + (i == j ? 0.1 : 0.0);
    Eigen::VectorXd w(n);
    for (auto& v : w) v = z(gen);
    Eigen::VectorXd y = c.llt().matrixL() * w;
    cli::Table t{{"x", "y"}, {}};
    for (int i = 0; i < n; ++i) t.rows.push_back({x[static_cast<std::size_t>(i)], y(i)});
    cli::write_csv(path("data.csv"), t);
    cli::write_csv(path("grid.csv"), {{"x"}, {{0.5}, {2.25}, {7.0}, {9.9}}});
    return path("data.csv");
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, HelpDocumentsEveryKey) {
  EXPECT_EQ(run({"--help"}), cli::Ok);
  for (const char* key : {"workers", "backend", "h", "hm", "hr", "seed", "threads", "worker_exe", "host",
                          "kernel", "theta", "nu", "mean", "data", "grid", "output", "se_fit", "r",
                          "post", "max_evaluations", "tolerance", "initial_step", "bench_n",
                          "bench_workers", "bench_h", "loglik", "fit", "predict", "simulate", "bench-chol"})
    EXPECT_NE(out_.str().find(key), std::string::npos) << key;
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({}), cli::ConfigError);
  EXPECT_EQ(run({"loglik", "--no-such-option", "1"}), cli::ConfigError);
  std::string data = write("d.csv", "x,y\n0,0\n1,1\n2,0.5\n");
  EXPECT_EQ(run({"loglik", "--data", data, "--kernel", "white", "--theta", "1", "--workers", "7"}),
            cli::ConfigError);
  EXPECT_NE(err_.str().find("7"), std::string::npos);
  EXPECT_EQ(run({"loglik", "--data", data, "--kernel", "white", "--theta", "-1"}), cli::ConfigError);
  EXPECT_EQ(run({"loglik", "--data", data, "--kernel", "white", "--theta", "1,2"}), cli::ConfigError);
  EXPECT_EQ(run({"loglik", "--data", data, "--kernel", "nope", "--theta", "1"}), cli::ConfigError);
  EXPECT_EQ(run({"loglik", "--data", path("missing.csv"), "--kernel", "white", "--theta", "1"}),
            cli::ConfigError);
  EXPECT_EQ(run({"loglik", "--data", data, "--theta", "1,1,1", "--nu", "1.0"}), cli::ConfigError);
  std::string bad = write("bad.csv", "x,y\n0,zero\n");
  EXPECT_EQ(run({"loglik", "--data", bad, "--kernel", "white", "--theta", "1"}), cli::ConfigError);
  std::string noy = write("noy.csv", "x,z\n0,0\n");
  EXPECT_EQ(run({"loglik", "--data", noy, "--kernel", "white", "--theta", "1"}), cli::ConfigError);
}

TEST_F(CliTest, LoglikTrivialProblem) {
  std::string data = write("d.csv", "x,y\n0,0\n");
  ASSERT_EQ(run({"loglik", "--data", data, "--kernel", "white", "--theta", "1"}), cli::Ok) << err_.str();
  double v = std::stod(out_.str());
  EXPECT_NEAR(v, -0.9189, 5e-5);
}

TEST_F(CliTest, ConfigFile) {
  std::string data = write("d.csv", "x,y\n0,0\n");
  std::string cfg = write("job.cfg",
                          "# trivial problem\nworkers = 3\nkernel = white\ntheta = 1\ndata = " + data + "\n");
  ASSERT_EQ(run({"loglik", "--config", cfg}), cli::Ok) << err_.str();
  EXPECT_NEAR(std::stod(out_.str()), -0.9189, 5e-5);
}

TEST_F(CliTest, NotPositiveDefiniteExitsThreeWithTheta) {
  std::string data = write("d.csv", "x,y\n1,0\n1,1\n1,2\n");
  EXPECT_EQ(run({"loglik", "--data", data, "--theta", "1,1,1e-300", "--workers", "3"}), cli::NumericalError);
  EXPECT_NE(err_.str().find("theta"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("1e-300"), std::string::npos) << err_.str();
}

TEST_F(CliTest, WorkerLaunchFailureExitsFour) {
  std::string data = write("d.csv", "x,y\n0,0\n");
  EXPECT_EQ(run({"loglik", "--data", data, "--kernel", "white", "--theta", "1", "--workers", "3", "--backend",
                 "socket", "--worker_exe", path("no-such-binary")}),
            cli::WorkerFailure);
}

TEST_F(CliTest, SocketBackendMatchesInProcess) {
  gp_data(25, 3);
  std::vector<std::string> common{"--data", path("data.csv"), "--theta", "1,1,0.1", "--workers", "3", "--h", "2"};
  auto args = common;
  args.insert(args.begin(), "loglik");
  ASSERT_EQ(run(args), cli::Ok) << err_.str();
  std::string inproc = out_.str();
  for (const char* a : {"--backend", "socket", "--worker_exe", BIGGP_WORKER_EXE}) args.push_back(a);
  ASSERT_EQ(run(args), cli::Ok) << err_.str();
  EXPECT_EQ(out_.str(), inproc);
}

TEST_F(CliTest, PredictCsvRoundTrip) {
  gp_data(40, 5);
  ASSERT_EQ(run({"predict", "--data", path("data.csv"), "--grid", path("grid.csv"), "--theta", "1,1,0.1",
                 "--workers", "3", "--output", path("pred.csv")}),
            cli::Ok)
      << err_.str();
  cli::Table got = cli::read_csv(path("pred.csv"));
  EXPECT_EQ(got.header, (std::vector<std::string>{"mean", "se"}));
  ASSERT_EQ(got.rows.size(), 4u);

  cli::Table data = cli::read_csv(path("data.csv"));
  ProblemData d;
  d.x.resize(40, 1);
  d.y.resize(40);
  for (int i = 0; i < 40; ++i) {
    d.x(i, 0) = data.rows[static_cast<std::size_t>(i)][0];
    d.y(i) = data.rows[static_cast<std::size_t>(i)][1];
  }
  d.xstar.resize(4, 1);
  d.xstar << 0.5, 2.25, 7.0, 9.9;
  ClusterOptions o;
  o.workers = 3;
  Cluster c = Cluster::spawn(o);
  KrigeProblem prob(c, "p", CovarianceSpec::builtin("matern"), d, {1.0, 1.0, 0.1});
  Prediction want = prob.predict(true);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(got.rows[j][0], want.mean[j]);
    EXPECT_EQ(got.rows[j][1], want.se[j]);
  }

  ASSERT_EQ(run({"predict", "--data", path("data.csv"), "--grid", path("grid.csv"), "--theta", "1,1,0.1",
                 "--se_fit", "false", "--output", path("mean.csv")}),
            cli::Ok);
  EXPECT_EQ(cli::read_csv(path("mean.csv")).header, std::vector<std::string>{"mean"});
}

TEST_F(CliTest, WriteReadCsvExact) {
  cli::Table t{{"a", "b"}, {{0.1, 1.0 / 3.0}, {-2.5e-300, 123456789.123456789}, {std::nextafter(1.0, 2.0), 0.0}}};
  cli::write_csv(path("t.csv"), t);
  cli::Table back = cli::read_csv(path("t.csv"));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST_F(CliTest, FitWhiteNoiseClosedForm) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z(0.0, 1.7);
  cli::Table t{{"x", "y"}, {}};
  double ss = 0.0;
  for (int i = 0; i < 100; ++i) {
    double y = z(gen);
    ss += y * y;
    t.rows.push_back({static_cast<double>(i), y});
  }
  cli::write_csv(path("d.csv"), t);
  ASSERT_EQ(run({"fit", "--data", path("d.csv"), "--kernel", "white", "--theta", "1", "--workers", "3",
                 "--tolerance", "1e-12", "--output", path("fit.json")}),
            cli::Ok)
      << err_.str();
  auto j = nlohmann::json::parse(slurp(path("fit.json")));
  double mle = ss / 100.0;
  EXPECT_NEAR(j["theta"][0].get<double>(), mle, 1e-4 * mle);
  EXPECT_EQ(j["kernel"], "white");
  EXPECT_EQ(j["parameter_names"][0], "sigma2");
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_FALSE(j["trace"].empty());
}

TEST_F(CliTest, BitReproducibleOutputs) {
  gp_data(30, 9);
  auto run_all = [&](const std::string& tag) {
    std::vector<std::string> common{"--data", path("data.csv"), "--grid", path("grid.csv"), "--theta",
                                    "1,1,0.1", "--workers", "3", "--seed", "42", "--h", "2"};
    auto with = [&](std::string cmd, std::vector<std::string> extra) {
      std::vector<std::string> args{cmd};
      args.insert(args.end(), common.begin(), common.end());
      args.insert(args.end(), extra.begin(), extra.end());
      EXPECT_EQ(run(args), cli::Ok) << err_.str();
    };
    with("fit", {"--max_evaluations", "60", "--output", path("fit" + tag + ".json")});
    with("predict", {"--output", path("pred" + tag + ".csv")});
    with("simulate", {"--r", "5", "--output", path("sim" + tag + ".csv")});
    with("simulate", {"--r", "3", "--post", "false", "--output", path("prior" + tag + ".csv")});
  };
  run_all("1");
  run_all("2");
  for (const char* f : {"fit", "pred", "sim", "prior"}) {
    std::string ext = std::string(f) == "fit" ? ".json" : ".csv";
    std::string a = slurp(path(f + std::string("1") + ext)), b = slurp(path(f + std::string("2") + ext));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
  cli::Table sim = cli::read_csv(path("sim1.csv"));
  EXPECT_EQ(sim.header, (std::vector<std::string>{"r1", "r2", "r3", "r4", "r5"}));
  EXPECT_EQ(sim.rows.size(), 4u);
  EXPECT_EQ(cli::read_csv(path("prior1.csv")).rows.size(), 30u);
}

TEST_F(CliTest, BenchCholSmall) {
  ASSERT_EQ(run({"bench-chol", "--bench_n", "96", "--bench_workers", "1,3", "--bench_h", "1,2", "--output",
                 path("bench.csv")}),
            cli::Ok)
      << err_.str();
  cli::Table t = cli::read_csv(path("bench.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"n", "P", "h", "seconds", "residual"}));
  ASSERT_EQ(t.rows.size(), 4u);
  for (const auto& row : t.rows) {
    EXPECT_EQ(row[0], 96.0);
    EXPECT_GT(row[3], 0.0);
    EXPECT_LT(row[4], 1e-10);
  }
}
