#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "affext/analysis.hpp"
#include "affext/cli.hpp"
#include "affext/dynamics.hpp"
#include "affext/errors.hpp"
#include "affext/extremals.hpp"
#include "affext/field_set.hpp"
#include "affext/lagrangian.hpp"

namespace py = pybind11;
using namespace affext;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Driftless affine control systems: dynamics, extremals and certificates.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<BasisDeficiencyError>(m, "BasisDeficiencyError", base.ptr());
  py::register_exception<ChartError>(m, "ChartError", base.ptr());

  py::class_<FieldSet>(m, "FieldSet")
      .def_property_readonly("dim", &FieldSet::dim)
      .def_property_readonly("count", &FieldSet::count)
      .def("eval", &FieldSet::eval, py::arg("i"), py::arg("x"))
      .def("jacobian", &FieldSet::jacobian, py::arg("i"), py::arg("x"))
      .def("frame", &FieldSet::frame, py::arg("x"));

  m.def(
      "parse_fields", [](const std::string& text, std::size_t n, std::size_t m_) { return parse_field_set(text, n, m_); },
      py::arg("text"), py::arg("n"), py::arg("m"));

  py::class_<Lagrangian>(m, "Lagrangian");
  m.def(
      "parse_lagrangian",
      [](const std::string& text, std::size_t n, std::size_t m_, bool allow_abs) {
        return parse_lagrangian(text, n, m_, allow_abs);
      },
      py::arg("text"), py::arg("n"), py::arg("m"), py::arg("allow_abs") = false);

  py::enum_<ControlPath::Interpolation>(m, "Interpolation")
      .value("Linear", ControlPath::Interpolation::Linear)
      .value("Hold", ControlPath::Interpolation::Hold);

  py::class_<ControlPath>(m, "ControlPath")
      .def(py::init<double, Matrix, ControlPath::Interpolation>(), py::arg("T"), py::arg("values"),
           py::arg("interpolation") = ControlPath::Interpolation::Linear)
      .def_static("zero", &ControlPath::zero, py::arg("T"), py::arg("N"), py::arg("m"))
      .def_static("constant", &ControlPath::constant, py::arg("T"), py::arg("N"), py::arg("value"))
      .def_property_readonly("horizon", &ControlPath::horizon)
      .def_property_readonly("intervals", &ControlPath::intervals)
      .def_property_readonly("channels", &ControlPath::channels)
      .def_property_readonly("values", &ControlPath::values)
      .def("__call__", &ControlPath::operator(), py::arg("s"))
      .def("l2_norm", &ControlPath::l2_norm)
      .def("sup_norm", &ControlPath::sup_norm)
      .def("lipschitz", &ControlPath::lipschitz);

  py::class_<IntegratorOptions>(m, "IntegratorOptions")
      .def(py::init<>())
      .def_readwrite("substeps", &IntegratorOptions::substeps);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("states", &Trajectory::states)
      .def("final_state", &Trajectory::final_state);

  m.def("integrate", &integrate, py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"),
        py::arg("options") = IntegratorOptions{});
  m.def("endpoint", &endpoint, py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"),
        py::arg("options") = IntegratorOptions{});
  m.def(
      "apply_dE",
      [](const FieldSet& F, const ControlPath& u, const Vector& x0, double T, const ControlPath& v) {
        return apply_dE(F, u, x0, T, v);
      },
      py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"), py::arg("v"));
  m.def(
      "adjoint_dE",
      [](const FieldSet& F, const ControlPath& u, const Vector& x0, double T, const Vector& lam) {
        return adjoint_dE(F, u, x0, T, lam);
      },
      py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"), py::arg("lam"));
  m.def("inner_product", &inner_product);
  m.def(
      "phi",
      [](const Lagrangian& L, const FieldSet& F, const ControlPath& u, const Vector& x0, double T) {
        return phi_functional(L, F, u, x0, T);
      },
      py::arg("lagrangian"), py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"));

  py::class_<LieRankResult>(m, "LieRankResult")
      .def_readonly("rank", &LieRankResult::rank)
      .def_readonly("depth", &LieRankResult::depth)
      .def_readonly("full_rank", &LieRankResult::full_rank)
      .def_readonly("rank_by_depth", &LieRankResult::rank_by_depth)
      .def_readonly("message", &LieRankResult::message);
  m.def(
      "lie_rank",
      [](const FieldSet& F, const Vector& x, std::size_t depth, double tol) { return lie_rank(F, x, depth, tol); },
      py::arg("fields"), py::arg("x"), py::arg("max_depth") = 4, py::arg("tol") = 1e-9);

  py::class_<GramReport>(m, "GramReport")
      .def_readonly("sigma_min", &GramReport::sigma_min)
      .def_readonly("sigma_max", &GramReport::sigma_max)
      .def_readonly("ratio", &GramReport::ratio)
      .def_readonly("singular", &GramReport::singular)
      .def_readonly("abnormal_candidate", &GramReport::abnormal_candidate)
      .def_readonly("gram", &GramReport::gram);
  m.def(
      "singularity_report",
      [](const FieldSet& F, const ControlPath& u, const Vector& x0, double T, double threshold) {
        return singularity_report(F, u, x0, T, threshold);
      },
      py::arg("fields"), py::arg("u"), py::arg("x0"), py::arg("T"), py::arg("threshold") = kSingularThreshold);

  py::class_<ShootOptions>(m, "ShootOptions")
      .def(py::init<>())
      .def_readwrite("grid", &ShootOptions::grid)
      .def_readwrite("integrator", &ShootOptions::integrator)
      .def_readwrite("tol", &ShootOptions::tol)
      .def_readwrite("max_iter", &ShootOptions::max_iter);

  py::class_<ExtremalSolution>(m, "ExtremalSolution")
      .def_readonly("u", &ExtremalSolution::u)
      .def_readonly("xi", &ExtremalSolution::xi)
      .def_readonly("p", &ExtremalSolution::p)
      .def_readonly("p0", &ExtremalSolution::p0)
      .def_readonly("lam", &ExtremalSolution::lambda)
      .def_readonly("phi", &ExtremalSolution::phi)
      .def_readonly("H0", &ExtremalSolution::H0)
      .def_readonly("iterations", &ExtremalSolution::iterations)
      .def_property_readonly("endpoint_gap", [](const ExtremalSolution& s) { return s.residuals.endpoint_gap; })
      .def_property_readonly("hamiltonian_drift",
                             [](const ExtremalSolution& s) { return s.residuals.hamiltonian_drift; });

  m.def(
      "shoot_extremal",
      [](const FieldSet& F, const Lagrangian& L, const Vector& x0, const Vector& target, double T, const Vector& p0,
         const ShootOptions& opts) { return shoot_extremal(F, L, x0, target, T, p0, opts); },
      py::arg("fields"), py::arg("lagrangian"), py::arg("x0"), py::arg("target"), py::arg("T"), py::arg("p0"),
      py::arg("options") = ShootOptions{});
  m.def(
      "multi_start",
      [](const FieldSet& F, const Lagrangian& L, const Vector& x0, const Vector& target, double T, std::size_t seeds,
         double scale, std::uint64_t seed, const ShootOptions& opts) {
        return multi_start(F, L, x0, target, T, default_seeds(F.dim(), seeds, scale, seed), opts).solutions;
      },
      py::arg("fields"), py::arg("lagrangian"), py::arg("x0"), py::arg("target"), py::arg("T"), py::arg("seeds") = 20,
      py::arg("scale") = 1.0, py::arg("seed") = 0, py::arg("options") = ShootOptions{});

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a CLI subcommand in-process and returns (exit_code, stdout, stderr).");
}
