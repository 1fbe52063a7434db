#pragma once

#include <functional>
#include <vector>

namespace biggp {

struct NelderMeadOptions {
  /// Edge length of the initial simplex (in the coordinates being searched).
  double initial_step = 0.5;
  /// Stop once every vertex is within tol * max(1, |best|_inf) of the best.
  double tolerance = 1e-6;
  int max_evaluations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f. Non-finite values rank below every finite value.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace biggp
