// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "biggp/distla.hpp"
#include "biggp/error.hpp"
#include "biggp/gp.hpp"
#include "biggp/grid.hpp"
#include "oracle.hpp"

using namespace biggp;
using oracle::Dense;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, bool gating, const std::function<Outcome()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* verdict = o.pass ? "PASS" : (gating ? "FAIL" : "FAIL (non-gating)");
  std::printf("criterion %2d: %-4s %s; %s [%.1fs]\n", id, verdict, title, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass && gating) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Dense collected(Cluster& c, const std::string& name) { return Dense::from(collect(c, name)); }

double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

const std::vector<long> kSizes{64, 257, 1000};
const std::vector<int> kWorkers{1, 3, 6, 10};
const std::vector<int> kReplication{1, 2, 3};

struct SerialRefs {
  Dense a, l, b, fwd, bck, lb, v, vb, vtv;
  double logdet;
};

SerialRefs serial_refs(long n) {
  SerialRefs s;
  s.a = oracle::random_spd(n, static_cast<unsigned>(n));
  s.l = oracle::cholesky(s.a);
  s.b = oracle::random_normal(n, 1, 1);
  s.fwd = oracle::forward(s.l, s.b);
  s.bck = oracle::back(s.l, s.b);
  s.lb = oracle::multiply(s.l, s.b);
  s.v = oracle::random_normal(n, 8, 2);
  s.vb = oracle::multiply(s.v, s.b, true, false);
  s.vtv = oracle::multiply(s.v, s.v, true, false);
  s.logdet = 0.0;
  for (long i = 0; i < n; ++i) s.logdet += 2.0 * std::log(s.l(i, i));
  return s;
}

std::map<long, SerialRefs>& refs() {
  static std::map<long, SerialRefs> r;
  if (r.empty())
    for (long n : kSizes) r[n] = serial_refs(n);
  return r;
}

Outcome layout_laws() {
  long cells = 0;
  for (int d = 1; d <= 5; ++d)
    for (int h = 1; h <= 4; ++h) {
      ProcessGrid g(d);
      DistLayout layout = DistLayout::triangular(BlockLayout(10 * h * d + 3, h, d));
      std::map<BlockIndex, int> cover;
      for (int r = 1; r <= g.size(); ++r) {
        Coord c = g.coord(r);
        auto blocks = layout.owned_blocks(c, g);
        long want = c.diagonal() ? h * (h + 1) / 2 : h * h;
        if (static_cast<long>(blocks.size()) != want)
          return {false, fmt("D=%d h=%d rank %d owns %zu blocks, want %ld", d, h, r, blocks.size(), want)};
        for (BlockIndex b : blocks) {
          if (b.row < b.col) return {false, fmt("D=%d h=%d block above diagonal", d, h)};
          if (++cover[b] > 1) return {false, fmt("D=%d h=%d block (%d,%d) owned twice", d, h, b.row, b.col)};
        }
      }
      int nb = h * d;
      if (static_cast<int>(cover.size()) != nb * (nb + 1) / 2)
        return {false, fmt("D=%d h=%d cover has %zu blocks", d, h, cover.size())};
      ++cells;
    }
  return {true, fmt("%ld (D,h) cells exact", cells)};
}

Outcome cholesky_sweep() {
  double worst_res = 0.0, worst_l = 0.0;
  for (long n : kSizes) {
    const SerialRefs& s = refs()[n];
    Matrix a = s.a.eigen();
    for (int p : kWorkers)
      for (int h : kReplication) {
        Cluster c = Cluster::spawn(p);
        distribute(c, "A", a, triangular_layout(c, n, h));
        cholesky(c, "A", "L");
        Matrix l = collect(c, "L");
        double res = rel_frobenius(l * l.transpose(), a);
        double dl = oracle::rel_diff(Dense::from(l), s.l);
        worst_res = std::max(worst_res, res);
        worst_l = std::max(worst_l, dl);
        if (res > 1e-10 || dl > 1e-10)
          return {false, fmt("n=%ld P=%d h=%d residual %.2e, |L - L_serial| %.2e", n, p, h, res, dl)};
      }
  }
  return {true, fmt("36 cells; max ||LL'-C||/||C|| %.1e, max L diff %.1e", worst_res, worst_l)};
}

Outcome kernel_oracles() {
  double solve = 0.0, prod = 0.0;
  for (long n : kSizes) {
    const SerialRefs& s = refs()[n];
    for (int p : kWorkers)
      for (int h : kReplication) {
        Cluster c = Cluster::spawn(p);
        distribute(c, "A", s.a.eigen(), triangular_layout(c, n, h));
        distribute(c, "b", s.b.eigen(), vector_layout(c, n, h));
        distribute(c, "V", s.v.eigen(), rectangular_layout(c, n, 8, h, 1));
        cholesky(c, "A", "L");
        triangular_solve(c, "L", "b", "f", Side::Forward);
        triangular_solve(c, "L", "b", "k", Side::Back);
        mult_chol(c, "L", "b", "Lb");
        crossprod_mat_vec(c, "V", "b", "Vb");
        crossprod_self(c, "V", "VV");
        double ld = log_det_from_chol(c, "L");
        double e_solve = std::max({oracle::rel_diff(collected(c, "f"), s.fwd),
                                   oracle::rel_diff(collected(c, "k"), s.bck),
                                   std::abs(ld - s.logdet) / std::abs(s.logdet)});
        // L itself differs from the serial factor at rounding level, so the
        // product check uses the distributed factor.
        Dense l = collected(c, "L");
        double e_prod = std::max({oracle::rel_diff(collected(c, "Lb"), oracle::multiply(l, s.b)),
                                  oracle::rel_diff(collected(c, "Vb"), s.vb),
                                  oracle::rel_diff(collected(c, "VV"), oracle::lower(s.vtv))});
        solve = std::max(solve, e_solve);
        prod = std::max(prod, e_prod);
        if (e_solve > 1e-10 || e_prod > 1e-12)
          return {false, fmt("n=%ld P=%d h=%d solve/logdet err %.2e, product err %.2e", n, p, h, e_solve, e_prod)};
      }
  }
  return {true, fmt("max solve/logdet err %.1e, max product err %.1e", solve, prod)};
}

Outcome memory_bound() {
  long worst_excess = -100;
  double overhead = 0.0;
  for (long n : kSizes)
    for (int p : kWorkers)
      for (int h : kReplication) {
        Cluster c = Cluster::spawn(p);
        distribute(c, "A", refs()[n].a.eigen(), triangular_layout(c, n, h));
        cholesky(c, "A", "L");
        long peak = 0;
        for (const KernelStats& s : c.last_kernel_stats()) {
          bool diag = c.grid().coord(s.rank).diagonal();
          long bound = diag ? h * (h + 1) / 2 + 4 : h * h + 4;
          worst_excess = std::max(worst_excess, s.peak_resident_blocks - bound);
          if (s.peak_resident_blocks > bound)
            return {false, fmt("n=%ld P=%d h=%d rank %d peak %ld > %ld", n, p, h, s.rank, s.peak_resident_blocks,
                               bound)};
          peak = std::max(peak, s.peak_resident_blocks);
        }
        if (p == 10 && h == 3 && n == 1000) {
          double b = h * c.grid().order();
          overhead = static_cast<double>(peak) / (b * b / 2.0 / p);
        }
      }
  if (overhead > 1.9) return {false, fmt("h=3 D=4 overhead factor %.2f > 1.9", overhead)};
  return {true, fmt("all peaks within bound (min slack %ld); h=3 D=4 overhead factor %.2f", -worst_excess, overhead)};
}

struct GpCase {
  std::vector<double> x, xs, y;
  Dense c, cs, css;
};

GpCase gp_case(int n, int m, double sigma2, double rho, double tau2, double span, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, span);
  GpCase g;
  g.x.resize(static_cast<std::size_t>(n));
  g.xs.resize(static_cast<std::size_t>(m));
  for (auto& v : g.x) v = u(gen);
  for (auto& v : g.xs) v = u(gen);
  g.c = oracle::exp_cov(g.x, g.x, sigma2, rho, tau2);
  g.cs = oracle::exp_cov(g.x, g.xs, sigma2, rho, 0.0);
  g.css = oracle::exp_cov(g.xs, g.xs, sigma2, rho, 0.0);
  Matrix l = g.c.eigen().llt().matrixL();
  Eigen::VectorXd z = oracle::random_normal(n, 1, seed + 1).eigen();
  Eigen::VectorXd y = l * z;
  g.y.assign(y.data(), y.data() + n);
  return g;
}

ProblemData data_of(const GpCase& g) {
  ProblemData d;
  d.x = Eigen::Map<const Eigen::VectorXd>(g.x.data(), static_cast<Index>(g.x.size()));
  d.y = Eigen::Map<const Eigen::VectorXd>(g.y.data(), static_cast<Index>(g.y.size()));
  d.xstar = Eigen::Map<const Eigen::VectorXd>(g.xs.data(), static_cast<Index>(g.xs.size()));
  return d;
}

Outcome gp_end_to_end() {
  const int n = 400, m = 25;
  const std::vector<double> theta{1.5, 2.0, 0.2};
  GpCase g = gp_case(n, m, theta[0], theta[1], theta[2], 40.0, 7);
  double want_ll = oracle::log_density(g.c, g.y, std::vector<double>(n, 0.0));
  auto want = oracle::krige(g.c, g.cs, g.css, g.y, std::vector<double>(n, 0.0), std::vector<double>(m, 0.0));
  double e_ll = 0.0, e_pred = 0.0, spread = 0.0;
  double ref_ll = 0.0;
  std::vector<double> ref_mean, ref_se;
  Matrix ref_cov;
  for (int p : kWorkers)
    for (int h : kReplication) {
      Cluster c = Cluster::spawn(p);
      KrigeProblem prob(c, "gp", CovarianceSpec::builtin("matern"), data_of(g), theta, {h, h, 1});
      double ll = prob.log_density();
      Prediction pr = prob.predict(true);
      Matrix cov = prob.prediction_variance();
      e_ll = std::max(e_ll, std::abs(ll - want_ll) / std::abs(want_ll));
      double sm = 0.0, ss = 0.0;
      for (int j = 0; j < m; ++j) {
        sm = std::max(sm, std::abs(pr.mean[j] - want.mean[j]));
        ss = std::max(ss, std::abs(pr.se[j] - std::sqrt(std::max(want.var[j], 0.0))));
      }
      double mean_scale = 0.0;
      for (double v : want.mean) mean_scale = std::max(mean_scale, std::abs(v));
      double sc = oracle::max_abs_diff(Dense::from(cov), want.cov) / oracle::max_abs(want.cov);
      e_pred = std::max({e_pred, sm / mean_scale, ss, sc});
      if (ref_mean.empty()) {
        ref_ll = ll;
        ref_mean = pr.mean;
        ref_se = pr.se;
        ref_cov = cov;
        continue;
      }
      double d = std::abs(ll - ref_ll) / std::abs(ref_ll);
      for (int j = 0; j < m; ++j)
        d = std::max({d, std::abs(pr.mean[j] - ref_mean[j]), std::abs(pr.se[j] - ref_se[j])});
      d = std::max(d, (cov - ref_cov).cwiseAbs().maxCoeff());
      spread = std::max(spread, d);
    }
  bool ok = e_ll <= 1e-8 && e_pred <= 1e-8 && spread <= 1e-10;
  return {ok, fmt("loglik rel err %.1e, prediction err %.1e, (P,h) spread %.1e", e_ll, e_pred, spread)};
}

Outcome mle_recovery() {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z(0.0, 2.0);
  ProblemData d;
  d.x = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0);
  d.y.resize(100);
  for (auto& v : d.y) v = z(gen);
  double closed = d.y.squaredNorm() / 100.0;
  Cluster c = Cluster::spawn(3);
  FitOptions tight;
  tight.search.tolerance = 1e-12;
  KrigeProblem white(c, "white", CovarianceSpec::builtin("white"), d, {1.0});
  double white_err = std::abs(white.optimize_log_dens(tight).theta[0] - closed) / closed;

  const std::vector<double> truth{1.0, 2.0, 0.1};
  double mean_s2 = 0.0, mean_rho = 0.0;
  int not_better = 0;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    GpCase g = gp_case(400, 1, truth[0], truth[1], truth[2], 100.0, 100 + seed);
    KrigeProblem prob(c, "fit", CovarianceSpec::builtin("matern"), data_of(g), truth);
    double at_truth = prob.log_density();
    prob.set_theta({0.5, 1.0, 0.5});
    FitResult r = prob.optimize_log_dens();
    if (r.loglik < at_truth) ++not_better;
    mean_s2 += r.theta[0] / 5.0;
    mean_rho += r.theta[1] / 5.0;
  }
  auto within2 = [](double est, double t) { return est >= t / 2.0 && est <= 2.0 * t; };
  bool ok = white_err <= 1e-4 && not_better == 0 && within2(mean_s2, truth[0]) && within2(mean_rho, truth[1]);
  return {ok, fmt("white-noise MLE rel err %.1e; l(fit) >= l(truth) in %d/5 seeds; mean sigma2 %.3f (true %.1f), "
                  "mean rho %.3f (true %.1f)",
                  white_err, 5 - not_better, mean_s2, truth[0], mean_rho, truth[1])};
}

Outcome simulation_statistics() {
  GpCase g = gp_case(30, 5, 1.0, 2.0, 0.1, 10.0, 17);
  Cluster c = Cluster::spawn(3, BackendKind::InProcess, 2024);
  KrigeProblem prob(c, "sim", CovarianceSpec::builtin("matern"), data_of(g), {1.0, 2.0, 0.1});
  const int r = 5000;
  Matrix prior = prob.simulate_realizations(r, false);
  Matrix cov = prior * prior.transpose() / r;
  double e_cov = rel_frobenius(cov, g.c.eigen());
  double bound_cov = 5.0 * std::sqrt(2.0 / r);

  const int rc = 2000;
  Matrix post = prob.simulate_realizations(rc, true);
  Prediction pr = prob.predict(true);
  double worst = 0.0;
  for (int j = 0; j < 5; ++j) {
    double mean = post.row(j).mean();
    worst = std::max(worst, std::abs(mean - pr.mean[j]) / (pr.se[j] / std::sqrt(double(rc))));
  }
  bool ok = e_cov <= bound_cov && worst <= 4.0;
  return {ok, fmt("prior cov rel Frobenius %.3f (bound %.3f); max |mean - yhat| = %.2f se/sqrt(r) (bound 4)", e_cov,
                  bound_cov, worst)};
}

Outcome determinism() {
  GpCase g = gp_case(60, 6, 1.0, 2.0, 0.1, 20.0, 5);
  auto once = [&] {
    Cluster c = Cluster::spawn(6, BackendKind::InProcess, 99);
    KrigeProblem prob(c, "det", CovarianceSpec::builtin("matern"), data_of(g), {0.7, 1.0, 0.3}, {2, 1, 1});
    FitOptions fo;
    fo.search.max_evaluations = 150;
    FitResult f = prob.optimize_log_dens(fo);
    Prediction p = prob.predict(true);
    Matrix s = prob.simulate_realizations(4, true);
    Matrix u = prob.simulate_realizations(3, false);
    std::vector<double> out = f.theta;
    out.push_back(f.loglik);
    out.insert(out.end(), p.mean.begin(), p.mean.end());
    out.insert(out.end(), p.se.begin(), p.se.end());
    out.insert(out.end(), s.data(), s.data() + s.size());
    out.insert(out.end(), u.data(), u.data() + u.size());
    return out;
  };
  auto a = once(), b = once();
  bool same = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  return {same, fmt("%zu output values %s", a.size(), same ? "bit-identical" : "differ")};
}

Outcome freshness() {
  ClusterOptions o;
  o.workers = 6;
  o.event_log = true;
  Cluster c = Cluster::spawn(o);
  GpCase g = gp_case(100, 2, 1.0, 2.0, 0.1, 20.0, 8);
  KrigeProblem prob(c, "fresh", CovarianceSpec::builtin("matern"), data_of(g), {1.0, 2.0, 0.1});
  prob.log_density();
  std::size_t first = c.take_events().size();
  prob.log_density();
  std::size_t second = c.take_events().size();
  return {first > 0 && second == 0, fmt("first call %zu kernel events, repeat call %zu", first, second)};
}

Outcome performance() {
  const long n = 3072;
  Matrix b = oracle::random_normal(n, n, 4).eigen();
  Matrix spd = b * b.transpose();
  spd.diagonal().array() += static_cast<double>(n);
  auto time_chol = [&](int p, int h) {
    Cluster c = Cluster::spawn(p);
    distribute(c, "A", spd, triangular_layout(c, n, h));
    auto t0 = std::chrono::steady_clock::now();
    cholesky(c, "A", "L");
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  double serial = time_chol(1, 1);
  double best = INFINITY;
  int best_h = 0;
  for (int h : kReplication) {
    double t = time_chol(6, h);
    if (t < best) best = t, best_h = h;
  }
  unsigned hw = std::thread::hardware_concurrency();
  double speedup = serial / best;
  return {speedup >= 1.8, fmt("n=%ld: P=1 %.2fs, P=6 best h=%d %.2fs, speedup %.2fx on %u hardware thread(s)", n,
                              serial, best_h, best, speedup, hw)};
}

}  // namespace

int main() {
  criterion(1, "layout laws", true, layout_laws);
  criterion(2, "Cholesky oracle sweep", true, cholesky_sweep);
  criterion(3, "kernel oracles", true, kernel_oracles);
  criterion(4, "memory bound", true, memory_bound);
  criterion(5, "GP end-to-end", true, gp_end_to_end);
  criterion(6, "MLE recovery", true, mle_recovery);
  criterion(7, "simulation statistics", true, simulation_statistics);
  criterion(8, "determinism", true, determinism);
  criterion(9, "freshness", true, freshness);
  criterion(10, "performance smoke", false, performance);
  std::printf("%s\n", failures == 0 ? "acceptance: all gating criteria passed"
                                    : fmt("acceptance: %d gating criteria failed", failures).c_str());
  return failures == 0 ? 0 : 1;
}
