#include "biggp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "biggp/error.hpp"

namespace biggp {

namespace {

double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  if (n == 0) raise(ErrorKind::InvalidArgument, "nothing to optimize");
  NelderMeadResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    return finite_or_inf(f(x));
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  values[0] = eval(x0);
  for (std::size_t k = 0; k < n; ++k) {
    simplex[k + 1][k] += options.initial_step;
    values[k + 1] = eval(simplex[k + 1]);
  }

  std::vector<std::size_t> order(n + 1);
  auto sort = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  };
  auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = c[k] + t * (w[k] - c[k]);
    return p;
  };

  for (;;) {
    sort();
    const auto& best = simplex[order.front()];
    double scale = 1.0, diameter = 0.0;
    for (double b : best) scale = std::max(scale, std::abs(b));
    for (const auto& v : simplex)
      for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(v[k] - best[k]));
    if (diameter <= options.tolerance * scale && std::isfinite(values[order.front()])) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;

    const std::size_t worst = order.back();
    std::vector<double> centroid(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[order[r]][k] / static_cast<double>(n);

    auto xr = point(centroid, simplex[worst], -1.0);
    double fr = eval(xr);
    const double fbest = values[order.front()], fsecond = values[order[n - 1]];
    if (fr < fbest) {
      auto xe = point(centroid, simplex[worst], -2.0);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = std::move(xe);
        values[worst] = fe;
      } else {
        simplex[worst] = std::move(xr);
        values[worst] = fr;
      }
      continue;
    }
    if (fr < fsecond) {
      simplex[worst] = std::move(xr);
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    auto xc = outside ? point(centroid, xr, 0.5) : point(centroid, simplex[worst], 0.5);
    double fc = eval(xc);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = std::move(xc);
      values[worst] = fc;
      continue;
    }
    const auto anchor = simplex[order.front()];
    for (std::size_t r = 1; r <= n; ++r) {
      auto& v = simplex[order[r]];
      v = point(anchor, v, 0.5);
      values[order[r]] = eval(v);
    }
  }
  result.x = simplex[order.front()];
  result.value = values[order.front()];
  return result;
}

}  // namespace biggp
