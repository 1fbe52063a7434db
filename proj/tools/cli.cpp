#include "cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "biggp/cluster.hpp"
#include "biggp/covariance.hpp"
#include "biggp/distla.hpp"
#include "biggp/error.hpp"
#include "biggp/gp.hpp"

namespace biggp::cli {

namespace {

struct Job {
  std::string command;
  int workers = 1;
  std::string backend = "inprocess";
  int h = 0, hm = 0, hr = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string worker_exe;
  std::string host = "127.0.0.1";

  std::string kernel = "matern";
  std::string theta;
  std::optional<double> nu;
  std::optional<double> mean;
  std::string data;
  std::string grid;
  std::string output;

  bool se_fit = true;
  int r = 1;
  bool post = true;
  int max_evaluations = 2000;
  double tolerance = 1e-6;
  double initial_step = 0.5;

  std::string bench_n = "2048";
  std::string bench_workers = "1,3,6";
  std::string bench_h = "1,2,3";
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    raise(ErrorKind::InvalidArgument, "'" + s + "' is not a number");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* key) {
  std::vector<T> out;
  for (const auto& item : split(s, ',')) {
    if (item.empty()) continue;
    double v = parse_double(item);
    if constexpr (std::is_integral_v<T>) {
      if (v != static_cast<double>(static_cast<T>(v)))
        raise(ErrorKind::InvalidArgument, std::string(key) + " must list integers");
    }
    out.push_back(static_cast<T>(v));
  }
  if (out.empty()) raise(ErrorKind::InvalidArgument, std::string(key) + " is empty");
  return out;
}

std::string format(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string self_executable() {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string() : p.string();
}

Cluster start_cluster(const Job& job, int workers) {
  ClusterOptions o;
  o.workers = workers;
  o.backend = backend_from_string(job.backend);
  o.seed = job.seed;
  o.threads_per_worker = job.threads;
  o.host = job.host;
  o.worker_executable = job.worker_exe;
  if (o.worker_executable.empty())
    if (const char* env = std::getenv("BIGGP_WORKER_EXE")) o.worker_executable = env;
  if (o.worker_executable.empty()) o.worker_executable = self_executable();
  return Cluster::spawn(o);
}

void require(const std::string& value, const char* key) {
  if (value.empty()) raise(ErrorKind::InvalidArgument, std::string("config key '") + key + "' is required");
}

struct Model {
  CovarianceSpec spec;
  ProblemData data;
  std::vector<double> theta;
};

Model load_model(const Job& job, bool need_grid) {
  require(job.data, "data");
  require(job.theta, "theta");
  Model model;
  model.spec = CovarianceSpec::builtin(job.kernel);
  model.theta = parse_list<double>(job.theta, "theta");

  Table t = read_csv(job.data);
  std::vector<std::size_t> input_cols;
  std::optional<std::size_t> ycol, vcol;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "y")
      ycol = c;
    else if (t.header[c] == "v")
      vcol = c;
    else
      input_cols.push_back(c);
  }
  if (!ycol) raise(ErrorKind::InvalidArgument, "data file has no 'y' column");
  if (input_cols.empty()) raise(ErrorKind::InvalidArgument, "data file has no input columns");
  const auto n = static_cast<Index>(t.rows.size());
  model.data.x.resize(n, static_cast<Index>(input_cols.size()));
  model.data.y.resize(n);
  std::vector<double> v;
  for (Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < input_cols.size(); ++k) model.data.x(i, static_cast<Index>(k)) = row[input_cols[k]];
    model.data.y(i) = row[*ycol];
    if (vcol) v.push_back(row[*vcol]);
  }
  if (vcol) model.data.inputs["v"] = v;
  if (job.nu) model.data.inputs["nu"] = {*job.nu};
  if (job.mean) {
    model.spec.mean = model.spec.pred_mean = "constant-mean";
    model.data.inputs["mean"] = {*job.mean};
  }

  if (need_grid) {
    require(job.grid, "grid");
    Table g = read_csv(job.grid);
    model.data.xstar.resize(static_cast<Index>(g.rows.size()), static_cast<Index>(g.header.size()));
    for (std::size_t i = 0; i < g.rows.size(); ++i)
      for (std::size_t k = 0; k < g.header.size(); ++k)
        model.data.xstar(static_cast<Index>(i), static_cast<Index>(k)) = g.rows[i][k];
  }
  return model;
}

int run_loglik(const Job& job, std::ostream& out) {
  Model model = load_model(job, false);
  Cluster cluster = start_cluster(job, job.workers);
  KrigeProblem p(cluster, "job", model.spec, model.data, model.theta, {job.h, job.hm, job.hr});
  out << std::setprecision(12) << p.log_density() << "\n";
  return Ok;
}

int run_fit(const Job& job, std::ostream& out) {
  require(job.output, "output");
  Model model = load_model(job, false);
  Cluster cluster = start_cluster(job, job.workers);
  KrigeProblem p(cluster, "job", model.spec, model.data, model.theta, {job.h, job.hm, job.hr});
  FitOptions opts;
  opts.search.max_evaluations = job.max_evaluations;
  opts.search.tolerance = job.tolerance;
  opts.search.initial_step = job.initial_step;
  FitResult fit = p.optimize_log_dens(opts);

  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : fit.trace) trace.push_back({{"theta", t.theta}, {"loglik", t.loglik}});
  nlohmann::json doc = {{"kernel", job.kernel},
                        {"parameter_names", model.spec.parameter_names},
                        {"theta", fit.theta},
                        {"loglik", fit.loglik},
                        {"converged", fit.converged},
                        {"budget_exhausted", fit.budget_exhausted},
                        {"evaluations", fit.trace.size()},
                        {"trace", trace}};
  std::ofstream f(job.output);
  if (!f) raise(ErrorKind::InvalidArgument, "cannot write '" + job.output + "'");
  f << doc.dump(2) << "\n";
  out << std::setprecision(12) << "loglik " << fit.loglik << (fit.converged ? "" : " (budget exhausted)")
      << "\n";
  return Ok;
}

int run_predict(const Job& job, std::ostream&) {
  require(job.output, "output");
  Model model = load_model(job, true);
  Cluster cluster = start_cluster(job, job.workers);
  KrigeProblem p(cluster, "job", model.spec, model.data, model.theta, {job.h, job.hm, job.hr});
  Prediction pred = p.predict(job.se_fit);
  Table t;
  t.header = job.se_fit ? std::vector<std::string>{"mean", "se"} : std::vector<std::string>{"mean"};
  for (std::size_t i = 0; i < pred.mean.size(); ++i)
    t.rows.push_back(job.se_fit ? std::vector<double>{pred.mean[i], pred.se[i]}
                                : std::vector<double>{pred.mean[i]});
  write_csv(job.output, t);
  return Ok;
}

int run_simulate(const Job& job, std::ostream&) {
  require(job.output, "output");
  Model model = load_model(job, job.post);
  Cluster cluster = start_cluster(job, job.workers);
  KrigeProblem p(cluster, "job", model.spec, model.data, model.theta, {job.h, job.hm, job.hr});
  Matrix sims = p.simulate_realizations(job.r, job.post);
  Table t;
  for (int k = 1; k <= job.r; ++k) t.header.push_back("r" + std::to_string(k));
  for (Index i = 0; i < sims.rows(); ++i) {
    std::vector<double> row;
    for (Index k = 0; k < sims.cols(); ++k) row.push_back(sims(i, k));
    t.rows.push_back(std::move(row));
  }
  write_csv(job.output, t);
  return Ok;
}

int run_bench(const Job& job, std::ostream& out) {
  require(job.output, "output");
  auto sizes = parse_list<Index>(job.bench_n, "bench_n");
  auto workers = parse_list<int>(job.bench_workers, "bench_workers");
  auto hs = parse_list<int>(job.bench_h, "bench_h");
  for (int w : workers) ProcessGrid::from_process_count(w);

  Table t;
  t.header = {"n", "P", "h", "seconds", "residual"};
  bool all_pass = true;
  for (Index n : sizes) {
    std::mt19937_64 gen(job.seed);
    std::normal_distribution<double> normal;
    Matrix b(n, n);
    for (Index k = 0; k < b.size(); ++k) b.data()[k] = normal(gen);
    Matrix a = b * b.transpose();
    a.diagonal().array() += static_cast<double>(n);
    const double norm = a.norm();
    for (int w : workers) {
      Cluster cluster = start_cluster(job, w);
      for (int h : hs) {
        DistLayout layout = triangular_layout(cluster, n, h);
        distribute(cluster, "bench.A", a, layout);
        auto start = std::chrono::steady_clock::now();
        cholesky(cluster, "bench.A", "bench.L");
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        Matrix l = collect(cluster, "bench.L");
        Matrix llt = l * l.transpose();
        double residual = (llt - a).norm() / norm;
        all_pass = all_pass && residual <= 1e-10;
        t.rows.push_back({static_cast<double>(n), static_cast<double>(w), static_cast<double>(h),
                          seconds, residual});
        out << "n=" << n << " P=" << w << " h=" << h << " seconds=" << seconds
            << " residual=" << residual << "\n";
        cluster.remove("bench.A");
        cluster.remove("bench.L");
      }
    }
  }
  write_csv(job.output, t);
  return all_pass ? Ok : NumericalError;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotTriangularNumber:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnsupportedSmoothness:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::UnknownFunction: return ConfigError;
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::SingularDiagonal:
    case ErrorKind::NonFiniteObjective:
    case ErrorKind::GeneratorError: return NumericalError;
    case ErrorKind::WorkerCrashed:
    case ErrorKind::ClusterDown:
    case ErrorKind::BackendUnavailable:
    case ErrorKind::Aborted: return WorkerFailure;
    default: return Failure;
  }
}

constexpr const char* kDescription =
    "Gaussian-process likelihood, fitting, prediction and simulation on a\n"
    "triangular grid of P = D(D+1)/2 workers.\n\n"
    "Jobs read a flat key = value config (--config); every key below may also\n"
    "be given as a command-line option. Data files are headered CSV: input\n"
    "columns, the response column 'y' and optionally known variances 'v'.\n"
    "Prediction grids hold input columns only.\n\n"
    "Exit codes: 2 configuration error, 3 numerical failure (theta is echoed),\n"
    "4 worker failure.";

}  // namespace

Table read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::InvalidArgument, "cannot read '" + path + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      raise(ErrorKind::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected " +
                                            std::to_string(t.header.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) raise(ErrorKind::InvalidArgument, "'" + path + "' is empty");
  return t;
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream f(path);
  if (!f) raise(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  for (std::size_t c = 0; c < table.header.size(); ++c) f << (c ? "," : "") << table.header[c];
  f << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) f << (c ? "," : "") << format(row[c]);
    f << "\n";
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app(kDescription, "biggp");
  app.set_help_flag("--help", "Print this help (every config key is listed below)");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Job config file (key = value lines, '#' comments)");
  Job job;

  app.add_option("--workers", job.workers, "workers: worker count P, a triangular number")
      ->capture_default_str();
  app.add_option("--backend", job.backend, "backend: inprocess or socket")->capture_default_str();
  app.add_option("--h", job.h, "h: replication factor for n-sized dimensions (0: block size <= 1000)");
  app.add_option("--hm", job.hm, "hm: replication factor for prediction dimensions");
  app.add_option("--hr", job.hr, "hr: replication factor for the realization dimension");
  app.add_option("--seed", job.seed, "seed: master seed of the worker normal streams")
      ->capture_default_str();
  app.add_option("--threads", job.threads, "threads: numeric threads per worker")->capture_default_str();
  app.add_option("--worker_exe", job.worker_exe,
                 "worker_exe: executable started for socket workers (default: this program)");
  app.add_option("--host", job.host, "host: address the socket backend listens on")
      ->capture_default_str();
  app.add_option("--kernel", job.kernel,
                 "kernel: white, sqexp, matern or matern-product-nugget")
      ->capture_default_str();
  app.add_option("--theta", job.theta, "theta: comma-separated positive parameters");
  app.add_option("--nu", job.nu, "nu: Matern smoothness, 0.5, 1.5 or 2.5");
  app.add_option("--mean", job.mean, "mean: constant mean (default zero)");
  app.add_option("--data", job.data, "data: observation CSV");
  app.add_option("--grid", job.grid, "grid: prediction-point CSV");
  app.add_option("--output", job.output, "output: result file (JSON for fit, CSV otherwise)");
  app.add_option("--se_fit", job.se_fit, "se_fit: predict also writes standard errors")
      ->capture_default_str();
  app.add_option("--r", job.r, "r: number of realizations to simulate")->capture_default_str();
  app.add_option("--post", job.post, "post: simulate conditionally on the data")
      ->capture_default_str();
  app.add_option("--max_evaluations", job.max_evaluations, "max_evaluations: fit budget")
      ->capture_default_str();
  app.add_option("--tolerance", job.tolerance, "tolerance: relative simplex size at convergence")
      ->capture_default_str();
  app.add_option("--initial_step", job.initial_step, "initial_step: initial simplex step in log theta")
      ->capture_default_str();
  app.add_option("--bench_n", job.bench_n, "bench_n: matrix orders for bench-chol")
      ->capture_default_str();
  app.add_option("--bench_workers", job.bench_workers, "bench_workers: worker counts for bench-chol")
      ->capture_default_str();
  app.add_option("--bench_h", job.bench_h, "bench_h: replication factors for bench-chol")
      ->capture_default_str();

  for (const char* name : {"loglik", "fit", "predict", "simulate", "bench-chol"})
    app.add_subcommand(name)->callback([&job, name] { job.command = name; });
  app.get_subcommand("loglik")->description("print the log density at theta");
  app.get_subcommand("fit")->description("maximize the log density; write theta and trace as JSON");
  app.get_subcommand("predict")->description("write predictive means (and se) as CSV");
  app.get_subcommand("simulate")->description("write realizations as CSV, one column each");
  app.get_subcommand("bench-chol")->description("time distributed Cholesky over n x P x h");

  std::string connect;
  int rank = 0;
  auto* worker = app.add_subcommand("worker", "serve as a socket worker (started by the master)");
  worker->add_option("--connect", connect, "host:port of the master")->required();
  worker->add_option("--rank", rank, "worker rank")->required();
  worker->callback([&job] { job.command = "worker"; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return ConfigError;
  }

  try {
    if (job.command == "worker") {
      auto colon = connect.rfind(':');
      if (colon == std::string::npos) raise(ErrorKind::InvalidArgument, "--connect expects host:port");
      return run_socket_worker(connect.substr(0, colon), std::stoi(connect.substr(colon + 1)), rank);
    }
    if (job.command == "loglik") return run_loglik(job, out);
    if (job.command == "fit") return run_fit(job, out);
    if (job.command == "predict") return run_predict(job, out);
    if (job.command == "simulate") return run_simulate(job, out);
    return run_bench(job, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return Failure;
  }
}

}  // namespace biggp::cli
