// Python bindings for the main operations: grid/field construction, the
// expansion pipeline, the Navier-Stokes solver, norms, rate fitting, and the
// sweep harness.
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "bll/derivs.hpp"
#include "bll/harness.hpp"
#include "bll/quad.hpp"
#include "bll/spectral.hpp"

namespace py = pybind11;
using namespace bll;

namespace {

// The C++ API passes grids around as shared_ptr<const Grid>, which pybind11
// cannot use as a holder type; expose an opaque handle instead.
struct PyGrid {
  GridPtr ptr;
};

py::array_t<double> field_to_numpy(const Field& f) {
  // Storage is column-major with x fastest == row-major [n_vert][n_x].
  py::array_t<double> out({f.n_vert(), f.n_x()});
  std::memcpy(out.mutable_data(), f.values().data(),
              sizeof(double) * f.n_x() * f.n_vert());
  return out;
}

Field field_from_numpy(const PyGrid& g, FieldKind kind,
                       const py::array_t<double, py::array::c_style |
                                                     py::array::forcecast>& a) {
  Field f(g.ptr, kind);
  if (a.ndim() != 2 || a.shape(0) != f.n_vert() || a.shape(1) != f.n_x())
    throw domain_error("array shape must be [n_vert, n_x] for this grid");
  std::memcpy(f.values().data(), a.data(),
              sizeof(double) * f.n_x() * f.n_vert());
  return f;
}

GevreyParams gevrey_from_kwargs(double gamma, int k, double rho0,
                                double lambda, int M, int dy_cap, double t) {
  GevreyParams p;
  p.gamma = gamma;
  p.k = k;
  p.rho0 = rho0;
  p.lambda = lambda;
  p.M = M;
  p.dy_cap = dy_cap;
  p.t = t;
  return p;
}

}  // namespace

PYBIND11_MODULE(_bll, m) {
  m.doc() = "boundary-layer laboratory: expansion pipeline, Navier-Stokes "
            "solver, norms, and sweep harness";

  py::enum_<FieldKind>(m, "FieldKind")
      .value("interior", FieldKind::interior)
      .value("layer", FieldKind::layer);
  py::enum_<Gamma>(m, "Gamma")
      .value("half", Gamma::half)
      .value("one", Gamma::one);

  py::class_<PyGrid>(m, "Grid")
      .def_property_readonly("n_x", [](const PyGrid& g) { return g.ptr->n_x(); })
      .def_property_readonly("n_y", [](const PyGrid& g) { return g.ptr->n_y(); })
      .def_property_readonly("n_z", [](const PyGrid& g) { return g.ptr->n_z(); })
      .def_property_readonly("x_nodes",
                             [](const PyGrid& g) { return g.ptr->x_nodes(); })
      .def_property_readonly("y_nodes",
                             [](const PyGrid& g) { return g.ptr->y_nodes(); })
      .def_property_readonly("z_nodes",
                             [](const PyGrid& g) { return g.ptr->z_nodes(); });
  m.def(
      "make_grid",
      [](int n_x, int n_y, int n_z, double y_max, double z_max, double delta) {
        GridParams p;
        p.n_x = n_x;
        p.n_y = n_y;
        p.n_z = n_z;
        p.y_max = y_max;
        p.z_max = z_max;
        p.delta = delta;
        return PyGrid{make_grid(p)};
      },
      py::arg("n_x") = 64, py::arg("n_y") = 128, py::arg("n_z") = 128,
      py::arg("y_max") = 10.0, py::arg("z_max") = 12.0,
      py::arg("delta") = 0.1);

  py::class_<Field>(m, "Field")
      .def_property_readonly("kind", &Field::kind)
      .def_property_readonly("grid",
                             [](const Field& f) { return PyGrid{f.grid()}; })
      .def("to_numpy", &field_to_numpy)
      .def("max_abs", &Field::max_abs)
      .def("__add__", [](const Field& a, const Field& b) { return a + b; })
      .def("__sub__", [](const Field& a, const Field& b) { return a - b; })
      .def("__rmul__", [](const Field& a, double c) { return c * a; });
  m.def("field", &field_from_numpy, py::arg("grid"), py::arg("kind"),
        py::arg("array"));
  m.def("zero_field",
        [](const PyGrid& g, FieldKind k) { return Field::zero(g.ptr, k); });
  m.def("make_datum",
        [](const PyGrid& g, const std::string& name) {
          return make_datum(g.ptr, name);
        },
        py::arg("grid"), py::arg("name"));

  m.def("l2_norm", py::overload_cast<const Field&>(&l2_norm));
  m.def("ddx", [](const Field& f) { return ddx(f); });
  m.def("ddy", [](const Field& f) { return ddy(f); });
  m.def(
      "gevrey_x",
      [](const Field& f, double gamma, int k, double rho0, double lambda,
         int M, int dy_cap, double t) {
        const NormValue v =
            gevrey_X(f, gevrey_from_kwargs(gamma, k, rho0, lambda, M, dy_cap, t));
        return py::make_tuple(v.value, v.tail_bound);
      },
      py::arg("f"), py::arg("gamma") = 0.5, py::arg("k") = 3,
      py::arg("rho0") = 2.0, py::arg("lambda") = 1.0, py::arg("M") = 11,
      py::arg("dy_cap") = 6, py::arg("t") = 0.0);

  py::class_<Pipeline>(m, "Pipeline")
      .def_property_readonly("output_times", &Pipeline::output_times);
  m.def(
      "run_pipeline",
      [](const PyGrid& g, const Field& omega0, Gamma gamma, double T,
         double dt, double beta, double u_far) {
        PipelineConfig cfg;
        cfg.gamma = gamma;
        cfg.T = T;
        cfg.dt = dt;
        cfg.beta = beta;
        cfg.u_far = u_far;
        return run_pipeline(g.ptr, omega0, cfg);
      },
      py::arg("grid"), py::arg("omega0"), py::arg("gamma") = Gamma::half,
      py::arg("T") = 0.25, py::arg("dt") = 2.5e-3, py::arg("beta") = 1.0,
      py::arg("u_far") = 0.0);

  py::class_<ApproxSolution>(m, "ApproxSolution")
      .def_readonly("eps", &ApproxSolution::eps)
      .def_readonly("t", &ApproxSolution::t)
      .def_readonly("u", &ApproxSolution::u)
      .def_readonly("v", &ApproxSolution::v)
      .def_readonly("p", &ApproxSolution::p)
      .def("check_invariants", &ApproxSolution::check_invariants,
           py::arg("div_tol") = 1e-6, py::arg("bc_tol") = 1e-6);
  m.def("assemble", &assemble, py::arg("pipeline"), py::arg("eps"),
        py::arg("t"));
  m.def("remainders_formula",
        [](const Pipeline& pl, double eps, double t) {
          Remainders r = remainders_formula(pl, eps, t);
          return py::make_tuple(r.r1, r.r2);
        });
  m.def("remainders_residual",
        [](const Pipeline& pl, double eps, double t) {
          Remainders r = remainders_residual(pl, eps, t);
          return py::make_tuple(r.r1, r.r2);
        });

  py::class_<NSState>(m, "NSState")
      .def_readonly("u", &NSState::u)
      .def_readonly("v", &NSState::v)
      .def_readonly("p", &NSState::p)
      .def_readonly("omega", &NSState::omega)
      .def_readonly("t", &NSState::t)
      .def("check_invariants", &NSState::check_invariants,
           py::arg("div_tol") = 1e-8, py::arg("boundary_tol") = 1e-4);
  py::class_<NSStepper>(m, "NSStepper")
      .def(py::init([](const PyGrid& g, double epsilon, double gamma,
                       double beta, double u_far) {
             NSParams p;
             p.epsilon = epsilon;
             p.gamma = gamma;
             p.beta = beta;
             p.u_far = u_far;
             return NSStepper(g.ptr, std::move(p));
           }),
           py::arg("grid"), py::arg("epsilon") = 0.1, py::arg("gamma") = 0.5,
           py::arg("beta") = 1.0, py::arg("u_far") = 0.0)
      .def("initialize", &NSStepper::initialize, py::arg("u0"), py::arg("v0"),
           py::arg("t0") = 0.0)
      .def("step", &NSStepper::step, py::arg("state"), py::arg("dt"));
  py::class_<ErrorState>(m, "ErrorState")
      .def_readonly("u", &ErrorState::u)
      .def_readonly("v", &ErrorState::v)
      .def_readonly("p", &ErrorState::p)
      .def_readonly("eta", &ErrorState::eta)
      .def_readonly("omega_err", &ErrorState::omega_err);
  m.def("error_fields", &error_fields, py::arg("ns_state"),
        py::arg("approx"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("slope", &FitResult::slope)
      .def_readonly("intercept", &FitResult::intercept)
      .def_readonly("r2", &FitResult::r2)
      .def_readonly("slope_stderr", &FitResult::slope_stderr)
      .def_readonly("ok", &FitResult::ok)
      .def_readonly("note", &FitResult::note);
  m.def("fit_rate", &fit_rate, py::arg("points"));

  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("T", &RunConfig::T)
      .def_readwrite("epsilon_list", &RunConfig::epsilon_list)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("jobs", &RunConfig::jobs);
  py::class_<CaseRecord>(m, "CaseRecord")
      .def_readonly("epsilon", &CaseRecord::epsilon)
      .def_readonly("ok", &CaseRecord::ok)
      .def_readonly("error", &CaseRecord::error)
      .def_readonly("err_u_l2", &CaseRecord::err_u_l2)
      .def_readonly("err_omega_l2", &CaseRecord::err_omega_l2)
      .def_readonly("r_x3", &CaseRecord::r_x3)
      .def_readonly("dual_path_max", &CaseRecord::dual_path_max)
      .def_readonly("div_max", &CaseRecord::div_max);
  py::class_<Verdict>(m, "Verdict")
      .def_readonly("name", &Verdict::name)
      .def_readonly("pass_", &Verdict::pass)
      .def_readonly("detail", &Verdict::detail);
  py::class_<RunReport>(m, "RunReport")
      .def_readonly("cases", &RunReport::cases)
      .def_readonly("verdicts", &RunReport::verdicts)
      .def_readonly("notes", &RunReport::notes);
  m.def("load_config", &load_config, py::arg("path"));
  m.def("run_sweep", &run_sweep, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("emit_report", &emit_report, py::arg("report"), py::arg("dir"));
}
