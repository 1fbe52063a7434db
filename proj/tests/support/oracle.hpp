#pragma once

// Serial dense reference implementations. Deliberately plain loops over
// std::vector storage so they share no code with the distributed kernels.

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Column-major n x m.
struct Dense {
  long rows = 0, cols = 0;
  std::vector<double> a;

  Dense() = default;
  Dense(long r, long c) : rows(r), cols(c), a(static_cast<std::size_t>(r * c), 0.0) {}
  double& operator()(long i, long j) { return a[static_cast<std::size_t>(i + j * rows)]; }
  double operator()(long i, long j) const { return a[static_cast<std::size_t>(i + j * rows)]; }

  Eigen::MatrixXd eigen() const { return Eigen::Map<const Eigen::MatrixXd>(a.data(), rows, cols); }
  static Dense from(const Eigen::MatrixXd& m) {
    Dense d(m.rows(), m.cols());
    for (long j = 0; j < m.cols(); ++j)
      for (long i = 0; i < m.rows(); ++i) d(i, j) = m(i, j);
    return d;
  }
};

inline Dense random_normal(long r, long c, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Dense d(r, c);
  for (auto& v : d.a) v = z(gen);
  return d;
}

inline Dense multiply(const Dense& x, const Dense& y, bool tx = false, bool ty = false) {
  long n = tx ? x.cols : x.rows, k = tx ? x.rows : x.cols, m = ty ? y.rows : y.cols;
  Dense out(n, m);
  for (long j = 0; j < m; ++j)
    for (long i = 0; i < n; ++i) {
      double s = 0.0;
      for (long t = 0; t < k; ++t) s += (tx ? x(t, i) : x(i, t)) * (ty ? y(j, t) : y(t, j));
      out(i, j) = s;
    }
  return out;
}

// B B^T + n I.
inline Dense random_spd(long n, unsigned seed) {
  Dense b = random_normal(n, n, seed);
  Dense a = multiply(b, b, false, true);
  for (long i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

inline Dense cholesky(const Dense& a) {
  long n = a.rows;
  Dense l(n, n);
  for (long j = 0; j < n; ++j) {
    double d = a(j, j);
    for (long k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw std::runtime_error("not positive definite");
    l(j, j) = std::sqrt(d);
    for (long i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (long k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline Dense forward(const Dense& l, const Dense& b) {
  Dense x = b;
  for (long c = 0; c < b.cols; ++c)
    for (long i = 0; i < l.rows; ++i) {
      double s = x(i, c);
      for (long k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  return x;
}

inline Dense back(const Dense& l, const Dense& b) {
  Dense x = b;
  for (long c = 0; c < b.cols; ++c)
    for (long i = l.rows - 1; i >= 0; --i) {
      double s = x(i, c);
      for (long k = i + 1; k < l.rows; ++k) s -= l(k, i) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  return x;
}

inline Dense lower(const Dense& a) {
  Dense out(a.rows, a.cols);
  for (long j = 0; j < a.cols; ++j)
    for (long i = j; i < a.rows; ++i) out(i, j) = a(i, j);
  return out;
}

inline double max_abs_diff(const Dense& x, const Dense& y) {
  double m = 0.0;
  for (std::size_t k = 0; k < x.a.size(); ++k) m = std::max(m, std::abs(x.a[k] - y.a[k]));
  return m;
}

inline double max_abs(const Dense& x) {
  double m = 0.0;
  for (double v : x.a) m = std::max(m, std::abs(v));
  return m;
}

inline double frobenius(const Dense& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

inline double rel_diff(const Dense& x, const Dense& y) {
  double scale = std::max(max_abs(y), 1e-300);
  return max_abs_diff(x, y) / scale;
}

inline double log_det_spd(const Dense& a) {
  Dense l = cholesky(a);
  double s = 0.0;
  for (long i = 0; i < l.rows; ++i) s += 2.0 * std::log(l(i, i));
  return s;
}

// Gaussian log density of y with mean mu and covariance c.
inline double log_density(const Dense& c, const std::vector<double>& y, const std::vector<double>& mu) {
  long n = c.rows;
  Dense r(n, 1);
  for (long i = 0; i < n; ++i) r(i, 0) = y[static_cast<std::size_t>(i)] - mu[static_cast<std::size_t>(i)];
  Dense l = cholesky(c);
  Dense u = forward(l, r);
  double ss = 0.0, ld = 0.0;
  for (long i = 0; i < n; ++i) {
    ss += u(i, 0) * u(i, 0);
    ld += std::log(l(i, i));
  }
  return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - ld - 0.5 * ss;
}

struct Kriging {
  std::vector<double> mean;
  std::vector<double> var;
  Dense cov;
};

// Simple kriging: mu* + Cs^T C^{-1} (y - mu), Css - Cs^T C^{-1} Cs.
inline Kriging krige(const Dense& c, const Dense& cs, const Dense& css, const std::vector<double>& y,
                     const std::vector<double>& mu, const std::vector<double>& mustar) {
  long n = c.rows, m = cs.cols;
  Dense r(n, 1);
  for (long i = 0; i < n; ++i) r(i, 0) = y[static_cast<std::size_t>(i)] - mu[static_cast<std::size_t>(i)];
  Dense l = cholesky(c);
  Dense w = back(l, forward(l, r));
  Dense k = back(l, forward(l, cs));
  Kriging out;
  out.cov = Dense(m, m);
  for (long j = 0; j < m; ++j) {
    double s = mustar[static_cast<std::size_t>(j)];
    for (long i = 0; i < n; ++i) s += cs(i, j) * w(i, 0);
    out.mean.push_back(s);
    for (long t = 0; t < m; ++t) {
      double q = css(t, j);
      for (long i = 0; i < n; ++i) q -= cs(i, t) * k(i, j);
      out.cov(t, j) = q;
    }
    out.var.push_back(out.cov(j, j));
  }
  return out;
}

// Exponential-kernel covariance with nugget on 1-d points.
inline Dense exp_cov(const std::vector<double>& a, const std::vector<double>& b, double sigma2,
                     double rho, double nugget_if_same_set) {
  Dense c(static_cast<long>(a.size()), static_cast<long>(b.size()));
  for (long j = 0; j < c.cols; ++j)
    for (long i = 0; i < c.rows; ++i) {
      c(i, j) = sigma2 * std::exp(-std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)]) / rho);
      if (i == j) c(i, j) += nugget_if_same_set;
    }
  return c;
}

}  // namespace oracle
