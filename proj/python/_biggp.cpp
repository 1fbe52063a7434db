#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "biggp/cluster.hpp"
#include "biggp/covariance.hpp"
#include "biggp/distla.hpp"
#include "biggp/error.hpp"
#include "biggp/gp.hpp"
#include "biggp/grid.hpp"

namespace py = pybind11;
using namespace biggp;

namespace {

using Release = py::call_guard<py::gil_scoped_release>;

DistLayout make_layout(const Cluster& c, const std::string& kind, Index rows, Index cols, int h, int hm) {
  if (kind == "triangular") return triangular_layout(c, rows, h);
  if (kind == "rectangular") return rectangular_layout(c, rows, cols, h, hm);
  if (kind == "vector") return vector_layout(c, rows, h);
  raise(ErrorKind::InvalidArgument, "unknown object kind '" + kind + "'");
}

py::dict fit_dict(const FitResult& r) {
  py::list trace;
  for (const auto& t : r.trace) trace.append(py::make_tuple(t.theta, t.loglik));
  py::dict d;
  d["theta"] = r.theta;
  d["loglik"] = r.loglik;
  d["converged"] = r.converged;
  d["budget_exhausted"] = r.budget_exhausted;
  d["trace"] = trace;
  return d;
}

std::unique_ptr<KrigeProblem> make_problem(Cluster& cluster, const std::string& name, const std::string& kernel,
                                           const Matrix& x, const Eigen::VectorXd& y,
                                           std::optional<Matrix> xstar, std::vector<double> theta, int h, int hm,
                                           int hr, std::optional<double> nu, std::optional<double> mean,
                                           std::optional<std::vector<double>> v) {
  CovarianceSpec spec = CovarianceSpec::builtin(kernel);
  ProblemData data;
  data.x = x;
  data.y = y;
  data.xstar = xstar ? *xstar : Matrix(0, x.cols());
  if (nu) data.inputs["nu"] = {*nu};
  if (mean) {
    spec.mean = spec.pred_mean = "constant-mean";
    data.inputs["mean"] = {*mean};
  }
  if (v) data.inputs["v"] = *v;
  return std::make_unique<KrigeProblem>(cluster, name, spec, std::move(data), std::move(theta),
                                        ProblemOptions{h, hm, hr});
}

}  // namespace

PYBIND11_MODULE(_biggp, m) {
  m.doc() = "Distributed Gaussian-process kernels";

  static py::handle error = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error(e.what());
      exc.attr("kind") = to_string(e.kind());
      exc.attr("rank") = e.rank() ? py::cast(*e.rank()) : py::none();
      exc.attr("detail") = e.detail() ? py::cast(*e.detail()) : py::none();
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("matern_correlation", &matern_correlation, py::arg("d"), py::arg("rho"), py::arg("nu"));
  m.def("kernel_parameter_names", &kernel_parameter_names, py::arg("kernel"));
  m.def("builtin_kernels", &builtin_kernels);
  m.def("default_replication", &default_replication, py::arg("n"), py::arg("grid_order"),
        py::arg("target_block_size") = 1000);

  py::class_<Cluster>(m, "Cluster")
      .def(py::init([](int workers, const std::string& backend, std::uint64_t seed, int threads,
                       const std::string& worker_exe, bool event_log) {
             ClusterOptions o;
             o.workers = workers;
             o.backend = backend_from_string(backend);
             o.seed = seed;
             o.threads_per_worker = threads;
             o.worker_executable = worker_exe;
             o.event_log = event_log;
             py::gil_scoped_release release;
             return Cluster::spawn(o);
           }),
           py::arg("workers") = 1, py::arg("backend") = "inprocess", py::arg("seed") = 0, py::arg("threads") = 1,
           py::arg("worker_exe") = "", py::arg("event_log") = false)
      .def_property_readonly("size", &Cluster::size)
      .def_property_readonly("grid_order", [](const Cluster& c) { return c.grid().order(); })
      .def_property_readonly("backend", [](const Cluster& c) { return to_string(c.backend()); })
      .def_property_readonly("seed", &Cluster::seed)
      .def_property_readonly("running", &Cluster::running)
      .def("shutdown", &Cluster::shutdown, Release())
      .def("push", [](Cluster& c, const std::string& name, std::vector<double> v) { c.push(name, v); }, Release())
      .def("pull", &Cluster::pull, Release(), py::arg("name"), py::arg("rank"))
      .def("ls", &Cluster::remote_ls, Release(), py::arg("rank"))
      .def("remove", [](Cluster& c, const std::string& name) { c.remove(name); }, Release())
      .def("has", &Cluster::has_distributed)
      .def(
          "distribute",
          [](Cluster& c, const std::string& name, const Matrix& value, const std::string& kind, int h, int hm) {
            py::gil_scoped_release release;
            distribute(c, name, value, make_layout(c, kind, value.rows(), value.cols(), h, hm));
          },
          py::arg("name"), py::arg("value"), py::arg("kind") = "triangular", py::arg("h") = 0, py::arg("hm") = 0)
      .def("collect", [](Cluster& c, const std::string& name) { return collect(c, name); }, Release())
      .def(
          "cholesky", [](Cluster& c, const std::string& in, const std::string& out) { cholesky(c, in, out); },
          Release(), py::arg("input"), py::arg("output"))
      .def(
          "solve",
          [](Cluster& c, const std::string& factor, const std::string& rhs, const std::string& out, bool back) {
            triangular_solve(c, factor, rhs, out, back ? Side::Back : Side::Forward);
          },
          Release(), py::arg("factor"), py::arg("rhs"), py::arg("output"), py::arg("transpose") = false)
      .def(
          "mult_chol",
          [](Cluster& c, const std::string& f, const std::string& x, const std::string& out) {
            mult_chol(c, f, x, out);
          },
          Release())
      .def(
          "crossprod",
          [](Cluster& c, const std::string& v, const std::optional<std::string>& u, const std::string& out) {
            if (u)
              crossprod_mat_vec(c, v, *u, out);
            else
              crossprod_self(c, v, out);
          },
          Release(), py::arg("v"), py::arg("u"), py::arg("output"))
      .def("log_det", [](Cluster& c, const std::string& f) { return log_det_from_chol(c, f); }, Release())
      .def("event_count", [](Cluster& c) { return c.take_events().size(); }, Release())
      .def("kernel_peaks", [](const Cluster& c) {
        std::vector<std::pair<long, long>> out;
        for (const auto& s : c.last_kernel_stats()) out.emplace_back(s.owned_blocks, s.peak_resident_blocks);
        return out;
      });

  py::class_<KrigeProblem>(m, "KrigeProblem")
      .def(py::init(&make_problem), py::keep_alive<1, 2>(), py::arg("cluster"), py::arg("name"),
           py::arg("kernel"), py::arg("x"), py::arg("y"), py::arg("xstar") = py::none(), py::arg("theta"),
           py::arg("h") = 0, py::arg("hm") = 0, py::arg("hr") = 0, py::arg("nu") = py::none(),
           py::arg("mean") = py::none(), py::arg("v") = py::none())
      .def_property("theta", &KrigeProblem::theta, &KrigeProblem::set_theta)
      .def_property_readonly("n", &KrigeProblem::n)
      .def_property_readonly("m", &KrigeProblem::m)
      .def(
          "log_density",
          [](KrigeProblem& p, std::optional<std::vector<double>> theta) {
            return theta ? p.log_density(*theta) : p.log_density();
          },
          Release(), py::arg("theta") = py::none())
      .def(
          "fit",
          [](KrigeProblem& p, int max_evaluations, double tolerance, double initial_step) {
            FitOptions o;
            o.search.max_evaluations = max_evaluations;
            o.search.tolerance = tolerance;
            o.search.initial_step = initial_step;
            FitResult r;
            {
              py::gil_scoped_release release;
              r = p.optimize_log_dens(o);
            }
            return fit_dict(r);
          },
          py::arg("max_evaluations") = 2000, py::arg("tolerance") = 1e-6, py::arg("initial_step") = 0.5)
      .def(
          "predict",
          [](KrigeProblem& p, bool se_fit) {
            Prediction pr;
            {
              py::gil_scoped_release release;
              pr = p.predict(se_fit);
            }
            if (!se_fit) return py::cast(pr.mean);
            return py::object(py::make_tuple(pr.mean, pr.se));
          },
          py::arg("se_fit") = true)
      .def("prediction_variance", &KrigeProblem::prediction_variance, Release())
      .def("simulate", &KrigeProblem::simulate_realizations, Release(), py::arg("r"), py::arg("post") = false);
}
