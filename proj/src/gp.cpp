#include "biggp/gp.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "biggp/covariance.hpp"
#include "biggp/error.hpp"

namespace biggp {

CovarianceSpec CovarianceSpec::builtin(const std::string& kernel) {
  CovarianceSpec s;
  s.parameter_names = kernel_parameter_names(kernel);
  s.cov = kernel + ":cov";
  s.cross_cov = kernel + ":cross";
  s.pred_cov = kernel + ":pred";
  return s;
}

namespace {

std::string format_theta(const std::vector<double>& theta) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t k = 0; k < theta.size(); ++k) os << (k ? ", " : "") << theta[k];
  os << ")";
  return os.str();
}

std::vector<double> point_major(const Matrix& x) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < x.cols(); ++k) out.push_back(x(i, k));
  return out;
}

}  // namespace

KrigeProblem::KrigeProblem(Cluster& cluster, std::string name, CovarianceSpec spec,
                           ProblemData data, std::vector<double> theta, ProblemOptions options)
    : cluster_(cluster),
      name_(std::move(name)),
      spec_(std::move(spec)),
      n_(data.y.size()),
      m_(data.xstar.rows()),
      options_(options) {
  if (n_ < 1) raise(ErrorKind::DimensionMismatch, "problem needs at least one observation");
  if (data.x.rows() != n_)
    raise(ErrorKind::DimensionMismatch, "inputs and responses differ in length");
  if (m_ > 0 && data.xstar.cols() != data.x.cols())
    raise(ErrorKind::DimensionMismatch, "prediction inputs have the wrong dimension");
  if (spec_.cov.empty()) raise(ErrorKind::InvalidArgument, "covariance generator is required");
  set_theta(std::move(theta));

  auto push = [&](const std::string& key, const std::vector<double>& value) {
    cluster_.push(object("in." + key), value);
    inputs_.push_back(key);
  };
  push("x", point_major(data.x));
  push("dim", {static_cast<double>(data.x.cols())});
  if (m_ > 0) push("xstar", point_major(data.xstar));
  for (const auto& [key, value] : data.inputs) push(key, value);
  distribute_vector(cluster_, object("y"), std::span<const double>(data.y.data(), data.y.size()),
                    options_.h);
}

KrigeProblem::~KrigeProblem() {
  if (!cluster_.running()) return;
  try {
    auto names = cluster_.remote_ls(1);
    for (const auto& n : names)
      if (n.rfind(name_ + ".", 0) == 0) cluster_.remove(n);
  } catch (const Error&) {
  }
}

void KrigeProblem::set_theta(std::vector<double> theta) {
  if (!spec_.parameter_names.empty() && theta.size() != spec_.parameter_names.size())
    raise(ErrorKind::InvalidArgument, "expected " + std::to_string(spec_.parameter_names.size()) +
                                          " parameters, got " + std::to_string(theta.size()));
  for (double t : theta)
    if (!(t > 0.0) || !std::isfinite(t))
      raise(ErrorKind::InvalidArgument, "parameters must be positive and finite: " + format_theta(theta));
  theta_ = std::move(theta);
}

bool KrigeProblem::fresh(const std::string& key) const {
  auto it = fresh_.find(key);
  return it != fresh_.end() && it->second == theta_;
}

void KrigeProblem::mark(const std::string& key) { fresh_[key] = theta_; }

std::map<std::string, std::string> KrigeProblem::generator_inputs() const {
  std::map<std::string, std::string> out;
  for (const auto& key : inputs_) out[key] = object("in." + key);
  return out;
}

template <class Fn>
auto KrigeProblem::guarded(Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotPositiveDefinite && e.kind() != ErrorKind::GeneratorError) throw;
    throw Error(e.kind(), e.message() + " at theta = " + format_theta(theta_), e.rank(), e.detail());
  }
}

void KrigeProblem::ensure_factor() {
  if (fresh("L")) return;
  fresh_.clear();
  guarded([&] {
    construct_distributed(cluster_, object("C"), triangular_layout(cluster_, n_, options_.h),
                          spec_.cov, theta_, generator_inputs());
    cholesky(cluster_, object("C"), object("L"));
    return 0;
  });
  cluster_.remove(object("C"));
  mark("L");
}

void KrigeProblem::ensure_u() {
  if (fresh("u")) return;
  ensure_factor();
  guarded([&] {
    return construct_distributed(cluster_, object("mu"), vector_layout(cluster_, n_, options_.h),
                                 spec_.mean, theta_, generator_inputs());
  });
  cluster_.remote_apply("subtract", {object("y"), object("mu")}, object("r"));
  triangular_solve(cluster_, object("L"), object("r"), object("u"), Side::Forward);
  mark("mu");
  mark("u");
}

double KrigeProblem::log_density() {
  if (fresh("loglik")) return loglik_;
  ensure_u();
  double logdet = log_det_from_chol(cluster_, object("L"));
  double ss = sum_of_squares(cluster_, object("u"));
  loglik_ = -0.5 * static_cast<double>(n_) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet -
            0.5 * ss;
  mark("loglik");
  return loglik_;
}

double KrigeProblem::log_density(const std::vector<double>& theta) {
  set_theta(theta);
  return log_density();
}

FitResult KrigeProblem::optimize_log_dens(const FitOptions& options) {
  FitResult result;
  std::vector<double> z0;
  for (double t : theta_) z0.push_back(std::log(t));
  auto objective = [&](const std::vector<double>& z) {
    std::vector<double> theta;
    for (double v : z) theta.push_back(std::exp(v));
    double l;
    try {
      l = log_density(theta);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotPositiveDefinite || result.trace.empty()) throw;
      l = -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(l) && result.trace.empty())
      raise(ErrorKind::NonFiniteObjective, "log density is not finite at theta = " + format_theta(theta));
    result.trace.push_back({theta, l});
    return -l;
  };
  NelderMeadResult nm = nelder_mead(objective, z0, options.search);
  std::vector<double> best;
  for (double v : nm.x) best.push_back(std::exp(v));
  result.theta = best;
  result.loglik = log_density(best);
  result.converged = nm.converged;
  result.budget_exhausted = !nm.converged;
  return result;
}

void KrigeProblem::ensure_v() {
  if (m_ < 1) raise(ErrorKind::InvalidArgument, "problem has no prediction points");
  if (fresh("V")) return;
  ensure_factor();
  guarded([&] {
    return construct_distributed(cluster_, object("Cs"),
                                 rectangular_layout(cluster_, n_, m_, options_.h, options_.hm),
                                 spec_.cross_cov, theta_, generator_inputs());
  });
  triangular_solve(cluster_, object("L"), object("Cs"), object("V"), Side::Forward);
  cluster_.remove(object("Cs"));
  mark("V");
}

std::vector<double> KrigeProblem::predicted_mean() {
  if (fresh("yhat")) return yhat_;
  ensure_u();
  ensure_v();
  guarded([&] {
    return construct_distributed(cluster_, object("mustar"), vector_layout(cluster_, m_, options_.hm),
                                 spec_.pred_mean, theta_, generator_inputs());
  });
  crossprod_mat_vec(cluster_, object("V"), object("u"), object("Vu"));
  cluster_.remote_apply("add", {object("mustar"), object("Vu")}, object("yhat"));
  yhat_ = collect_vector(cluster_, object("yhat"));
  mark("yhat");
  return yhat_;
}

Prediction KrigeProblem::predict(bool se_fit) {
  Prediction p;
  p.mean = predicted_mean();
  if (!se_fit) return p;
  guarded([&] {
    return construct_distributed(cluster_, object("cssdiag"), vector_layout(cluster_, m_, options_.hm),
                                 spec_.pred_cov, theta_, generator_inputs(), true);
  });
  crossprod_self_diag(cluster_, object("V"), object("vdiag"));
  cluster_.remote_apply("subtract", {object("cssdiag"), object("vdiag")}, object("se2"));
  std::vector<double> se2 = collect_vector(cluster_, object("se2"));
  for (double& s : se2) {
    if (s < 0.0) {
      s = 0.0;
      ++p.clamped;
    }
    p.se.push_back(std::sqrt(s));
  }
  if (p.clamped > 0)
    std::clog << "warning: " << p.clamped << " negative prediction variance(s) set to zero\n";
  return p;
}

void KrigeProblem::ensure_sigma() {
  ensure_v();
  if (fresh("Sigma")) return;
  guarded([&] {
    return construct_distributed(cluster_, object("Css"), triangular_layout(cluster_, m_, options_.hm),
                                 spec_.pred_cov, theta_, generator_inputs());
  });
  crossprod_self(cluster_, object("V"), object("VtV"));
  cluster_.remote_apply("subtract", {object("Css"), object("VtV")}, object("Sigma"));
  mark("Sigma");
}

Matrix KrigeProblem::prediction_variance() {
  ensure_sigma();
  Matrix s = collect(cluster_, object("Sigma"));
  return s.selfadjointView<Eigen::Lower>();
}

Matrix KrigeProblem::simulate_realizations(int r, bool post) {
  if (r < 1) raise(ErrorKind::InvalidArgument, "number of realizations must be positive");
  Matrix out;
  if (!post) {
    ensure_u();
    construct_rnorm(cluster_, object("Z"),
                    rectangular_layout(cluster_, n_, r, options_.h, options_.hr), zero_draws_);
    mult_chol(cluster_, object("L"), object("Z"), object("LZ"));
    out = collect(cluster_, object("LZ"));
    std::vector<double> mean = collect_vector(cluster_, object("mu"));
    out.colwise() += Eigen::Map<const Eigen::VectorXd>(mean.data(), n_);
  } else {
    std::vector<double> mean = predicted_mean();
    ensure_sigma();
    if (!fresh("LS")) {
      guarded([&] { return cholesky(cluster_, object("Sigma"), object("LS")); });
      mark("LS");
    }
    construct_rnorm(cluster_, object("Zstar"),
                    rectangular_layout(cluster_, m_, r, options_.hm, options_.hr), zero_draws_);
    mult_chol(cluster_, object("LS"), object("Zstar"), object("LZstar"));
    out = collect(cluster_, object("LZstar"));
    out.colwise() += Eigen::Map<const Eigen::VectorXd>(mean.data(), m_);
  }
  return out;
}

}  // namespace biggp
