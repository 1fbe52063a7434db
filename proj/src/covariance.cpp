#include "biggp/covariance.hpp"

#include <cmath>
#include <functional>
#include <mutex>

#include "biggp/error.hpp"
#include "biggp/object_store.hpp"

namespace biggp {

double matern_correlation(double d, double rho, double nu) {
  if (!(rho > 0.0)) raise(ErrorKind::InvalidArgument, "Matern range must be positive");
  if (!(d >= 0.0)) raise(ErrorKind::InvalidArgument, "distance must be non-negative");
  double t = std::sqrt(2.0 * nu) * d / rho;
  if (nu == 0.5) return std::exp(-t);
  if (nu == 1.5) return (1.0 + t) * std::exp(-t);
  if (nu == 2.5) return (1.0 + t + t * t / 3.0) * std::exp(-t);
  raise(ErrorKind::UnsupportedSmoothness,
        "Matern smoothness " + std::to_string(nu) + " is not one of 0.5, 1.5, 2.5");
}

double sqexp_correlation(double d, double rho) {
  if (!(rho > 0.0)) raise(ErrorKind::InvalidArgument, "range must be positive");
  return std::exp(-d * d / (2.0 * rho * rho));
}

namespace {

struct Points {
  std::span<const double> data;
  int dim = 1;

  Index count() const { return static_cast<Index>(data.size()) / dim; }
  const double* at(Index i) const {
    if (i < 1 || i > count())
      raise(ErrorKind::InvalidArgument, "point index " + std::to_string(i) + " is out of range");
    return data.data() + (i - 1) * dim;
  }
};

double scalar_input(const GeneratorInputs& in, const char* key, double fallback) {
  auto it = in.find(key);
  if (it == in.end() || it->second.empty()) return fallback;
  return it->second[0];
}

Points points(const GeneratorInputs& in, const char* key) {
  auto it = in.find(key);
  if (it == in.end()) raise(ErrorKind::InvalidArgument, std::string("generator input '") + key + "' is missing");
  Points p{it->second, static_cast<int>(scalar_input(in, "dim", 1.0))};
  if (p.dim < 1 || p.data.size() % static_cast<std::size_t>(p.dim) != 0)
    raise(ErrorKind::InvalidArgument, std::string("input '") + key + "' does not match dim");
  return p;
}

double distance(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

struct Kernel {
  std::vector<std::string> names;
  int min_dim = 1;
  // Latent covariance between two points.
  std::function<double(std::span<const double>, const double*, const double*, int, double nu)> latent;
  // Variance added on the observation diagonal (before known variances).
  std::function<double(std::span<const double>)> nugget;
  bool pred_nugget = false;
  double default_nu = 0.5;
};

const std::map<std::string, Kernel>& kernels() {
  static const std::map<std::string, Kernel> table = [] {
    std::map<std::string, Kernel> k;
    k["white"] = {{"sigma2"},
                  1,
                  [](auto, const double*, const double*, int, double) { return 0.0; },
                  [](std::span<const double> t) { return t[0]; },
                  true,
                  0.5};
    k["sqexp"] = {{"sigma2", "rho", "tau2"},
                  1,
                  [](std::span<const double> t, const double* a, const double* b, int dim, double) {
                    return t[0] * sqexp_correlation(distance(a, b, dim), t[1]);
                  },
                  [](std::span<const double> t) { return t[2]; },
                  false,
                  0.5};
    k["matern"] = {{"sigma2", "rho", "tau2"},
                   1,
                   [](std::span<const double> t, const double* a, const double* b, int dim, double nu) {
                     return t[0] * matern_correlation(distance(a, b, dim), t[1], nu);
                   },
                   [](std::span<const double> t) { return t[2]; },
                   false,
                   0.5};
    k["matern-product-nugget"] = {
        {"sigma2", "rho1", "rho2", "tau2", "eta2"},
        2,
        [](std::span<const double> t, const double* a, const double* b, int, double nu) {
          double c = t[0] * matern_correlation(std::abs(a[0] - b[0]), t[1], nu) *
                     matern_correlation(std::abs(a[1] - b[1]), t[2], nu);
          return a[1] == b[1] ? c + t[3] : c;
        },
        [](std::span<const double> t) { return t[4]; },
        false,
        2.5};
    return k;
  }();
  return table;
}

const Kernel& kernel(const std::string& id) {
  auto it = kernels().find(id);
  if (it == kernels().end()) raise(ErrorKind::InvalidArgument, "unknown kernel '" + id + "'");
  return it->second;
}

enum class Part { Cov, Cross, Pred };

Generator make_generator(const std::string& id, Part part) {
  return [id, part](std::span<const double> theta, const GeneratorInputs& in,
                    std::span<const ElementIndex> idx, std::span<double> out) {
    const Kernel& k = kernel(id);
    if (theta.size() != k.names.size())
      raise(ErrorKind::InvalidArgument, "kernel '" + id + "' takes " +
                                            std::to_string(k.names.size()) + " parameters");
    for (double t : theta)
      if (!(t >= 0.0) || !std::isfinite(t))
        raise(ErrorKind::InvalidArgument, "kernel parameters must be finite and non-negative");
    const double nu = scalar_input(in, "nu", k.default_nu);
    Points a = points(in, part == Part::Pred ? "xstar" : "x");
    Points b = points(in, part == Part::Cov ? "x" : "xstar");
    if (a.dim < k.min_dim)
      raise(ErrorKind::InvalidArgument, "kernel '" + id + "' needs " + std::to_string(k.min_dim) + "-d inputs");
    std::span<const double> v;
    if (part == Part::Cov)
      if (auto it = in.find("v"); it != in.end()) v = it->second;
    for (std::size_t e = 0; e < idx.size(); ++e) {
      Index i = idx[e].row, j = idx[e].col;
      double c = k.latent(theta, a.at(i), b.at(j), a.dim, nu);
      if (i == j && (part == Part::Cov || (part == Part::Pred && k.pred_nugget))) {
        c += k.nugget(theta);
        if (!v.empty()) c += v[static_cast<std::size_t>(i - 1)];
      }
      out[e] = c;
    }
  };
}

}  // namespace

std::vector<std::string> builtin_kernels() {
  std::vector<std::string> out;
  for (const auto& [id, k] : kernels()) out.push_back(id);
  return out;
}

std::vector<std::string> kernel_parameter_names(const std::string& id) { return kernel(id).names; }

void register_covariance_generators() {
  static std::once_flag once;
  std::call_once(once, [] {
    for (const auto& [id, k] : kernels()) {
      register_generator(id + ":cov", make_generator(id, Part::Cov));
      register_generator(id + ":cross", make_generator(id, Part::Cross));
      register_generator(id + ":pred", make_generator(id, Part::Pred));
    }
    register_generator("zero-mean", [](auto, const GeneratorInputs&, std::span<const ElementIndex>,
                                       std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    });
    register_generator("constant-mean", [](auto, const GeneratorInputs& in,
                                           std::span<const ElementIndex>, std::span<double> out) {
      std::fill(out.begin(), out.end(), scalar_input(in, "mean", 0.0));
    });
  });
}

}  // namespace biggp
