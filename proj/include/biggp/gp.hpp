#pragma once

/** @file
 *
 * Kriging on a cluster: likelihood, maximum likelihood, prediction and
 * simulation for a Gaussian process with a distributed covariance matrix.
 *
 * All order-n^2 objects live on the workers under "<name>.<object>"; the
 * master keeps metadata and collected vectors only. Derived objects are
 * recomputed only when theta changes.
 */

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "biggp/cluster.hpp"
#include "biggp/distla.hpp"
#include "biggp/optimize.hpp"

namespace biggp {

/// Generator ids for the five model functions; see covariance.hpp.
struct CovarianceSpec {
  std::string mean = "zero-mean";
  std::string pred_mean = "zero-mean";
  std::string cov;
  std::string cross_cov;
  std::string pred_cov;
  std::vector<std::string> parameter_names;

  /// Spec for a built-in kernel with zero mean.
  static CovarianceSpec builtin(const std::string& kernel);
};

struct ProblemData {
  Matrix x;      ///< n x d observation inputs
  Eigen::VectorXd y;
  Matrix xstar;  ///< m x d prediction inputs; may have zero rows
  /// Further replicated generator inputs, e.g. "nu", "mean", "v".
  std::map<std::string, std::vector<double>> inputs;
};

struct ProblemOptions {
  int h = 0;   ///< replication for n-sized dimensions (0: default)
  int hm = 0;  ///< replication for m-sized dimensions
  int hr = 0;  ///< replication for the realization dimension of simulations
};

struct Prediction {
  std::vector<double> mean;
  std::vector<double> se;  ///< empty unless requested
  int clamped = 0;         ///< negative variances set to zero
};

struct FitOptions {
  NelderMeadOptions search;
};

struct TracePoint {
  std::vector<double> theta;
  double loglik;
};

struct FitResult {
  std::vector<double> theta;
  double loglik = 0.0;
  std::vector<TracePoint> trace;
  bool converged = false;
  bool budget_exhausted = false;
};

class KrigeProblem {
 public:
  KrigeProblem(Cluster& cluster, std::string name, CovarianceSpec spec, ProblemData data,
               std::vector<double> theta, ProblemOptions options = {});
  ~KrigeProblem();
  KrigeProblem(const KrigeProblem&) = delete;
  KrigeProblem& operator=(const KrigeProblem&) = delete;

  const std::string& name() const noexcept { return name_; }
  Index n() const noexcept { return n_; }
  Index m() const noexcept { return m_; }
  const std::vector<double>& theta() const noexcept { return theta_; }
  /// Throws InvalidArgument for wrong length or non-positive entries.
  void set_theta(std::vector<double> theta);

  double log_density();
  double log_density(const std::vector<double>& theta);

  /// Nelder-Mead on log(theta), started from the current theta. On return
  /// the problem holds the best theta found.
  FitResult optimize_log_dens(const FitOptions& options = {});

  Prediction predict(bool se_fit = true);
  /// Posterior covariance of the latent process at the prediction points.
  Matrix prediction_variance();
  /// n x r (post = false) or m x r (post = true) realizations.
  Matrix simulate_realizations(int r, bool post);

  /// Test hook: simulations use zero instead of normal draws.
  void set_zero_draws(bool zero) { zero_draws_ = zero; }

  /// Distributed name of one of the problem's objects.
  std::string object(const std::string& suffix) const { return name_ + "." + suffix; }

 private:
  bool fresh(const std::string& key) const;
  void mark(const std::string& key);
  std::map<std::string, std::string> generator_inputs() const;
  void ensure_factor();
  void ensure_u();
  void ensure_v();
  void ensure_sigma();
  std::vector<double> predicted_mean();
  template <class Fn>
  auto guarded(Fn fn);

  Cluster& cluster_;
  std::string name_;
  CovarianceSpec spec_;
  Index n_;
  Index m_;
  std::vector<double> theta_;
  ProblemOptions options_;
  std::vector<std::string> inputs_;
  std::map<std::string, std::vector<double>> fresh_;
  double loglik_ = 0.0;
  std::vector<double> yhat_;
  bool zero_draws_ = false;
};

}  // namespace biggp
