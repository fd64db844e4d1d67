#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <vector>

#include "condgpc/pipeline.hpp"

namespace py = pybind11;
using namespace condgpc;

namespace {

std::vector<double> field_values(const Field& f) { return {f.values().begin(), f.values().end()}; }

// JSON crosses the boundary as text; the Python side parses it with the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional KL expansions, gPC surrogates and MCMC estimation of conductivity";

  py::class_<Interval>(m, "Interval")
      .def(py::init<double, double>(), py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &Interval::lo)
      .def_readwrite("hi", &Interval::hi);

  py::class_<Grid>(m, "Grid")
      .def_static("line", &Grid::line, py::arg("extent"), py::arg("nodes"))
      .def_static("rectangle", &Grid::rectangle, py::arg("x1"), py::arg("x2"), py::arg("cells1"),
                  py::arg("cells2"))
      .def_property_readonly("dimension", &Grid::dimension)
      .def_property_readonly("size", &Grid::size)
      .def("point", &Grid::point)
      .def("weights", &Grid::weights)
      .def("__len__", &Grid::size);

  py::class_<LognormalMoments>(m, "LognormalMoments")
      .def_readonly("mu_g", &LognormalMoments::mu_g)
      .def_readonly("sigma_g", &LognormalMoments::sigma_g);
  m.def("lognormal_moments", &lognormal_moments, py::arg("mu_k"), py::arg("sigma_k"));

  py::class_<CovarianceKernel>(m, "CovarianceKernel")
      .def_static("squared_exponential", py::overload_cast<double>(&CovarianceKernel::squared_exponential))
      .def_static("squared_exponential_2d",
                  py::overload_cast<double, double>(&CovarianceKernel::squared_exponential))
      .def_static("separable_exponential", &CovarianceKernel::separable_exponential)
      .def_property_readonly("name", &CovarianceKernel::name);

  py::class_<KLExpansion>(m, "KLExpansion")
      .def_readonly("grid", &KLExpansion::grid)
      .def_readonly("eigenvalues", &KLExpansion::eigenvalues)
      .def_readonly("modes", &KLExpansion::modes)
      .def_readonly("mean", &KLExpansion::mean)
      .def_readonly("sigma_g", &KLExpansion::sigma_g)
      .def("energy_fraction", &KLExpansion::energy_fraction)
      .def("__len__", &KLExpansion::size);

  m.def(
      "compute_kl",
      [](const CovarianceKernel& k, const Grid& g, double sigma_g, std::optional<std::size_t> modes,
         std::optional<double> energy, double mean) {
        if (modes.has_value() == energy.has_value())
          throw py::value_error("give exactly one of modes or energy");
        return compute_kl(k, g, sigma_g, modes ? KlTarget::fixed(*modes) : KlTarget::energy(*energy), mean);
      },
      py::arg("kernel"), py::arg("grid"), py::arg("sigma_g"), py::kw_only(), py::arg("modes") = py::none(),
      py::arg("energy") = py::none(), py::arg("mean") = 0.0);
  m.def(
      "sample_realization",
      [](const KLExpansion& kl, const std::vector<double>& xi) { return field_values(sample_realization(kl, xi)); },
      py::arg("kl"), py::arg("xi"));

  py::class_<KappaObservations>(m, "KappaObservations")
      .def_readonly("points", &KappaObservations::points)
      .def_readonly("values", &KappaObservations::values)
      .def_readonly("dropped", &KappaObservations::dropped)
      .def("__len__", &KappaObservations::size);
  m.def(
      "observe_log_kappa",
      [](const Grid& g, const std::vector<double>& log_kappa, const std::vector<std::size_t>& points) {
        return observe_log_kappa(Field(g, log_kappa), points);
      },
      py::arg("grid"), py::arg("log_kappa"), py::arg("points"));

  py::class_<ConditionalKL>(m, "ConditionalKL")
      .def_property_readonly("dimension", &ConditionalKL::dimension)
      .def_readonly("reduced_eigenvalues", &ConditionalKL::reduced_eigenvalues)
      .def_readonly("reduced_modes", &ConditionalKL::reduced_modes)
      .def_readonly("mean", &ConditionalKL::mean)
      .def_readonly("observations", &ConditionalKL::observations)
      .def("projector_rank", &ConditionalKL::projector_rank, py::arg("cutoff") = 1e-8)
      .def("fingerprint", &ConditionalKL::fingerprint)
      .def("variance", [](const ConditionalKL& c) { return field_values(conditional_variance_field(c)); })
      .def("sample", [](const ConditionalKL& c, const std::vector<double>& xi) {
        return field_values(sample_conditional(c, xi).kappa);
      });
  m.def(
      "condition",
      [](const KLExpansion& kl, const KappaObservations& obs, double nugget) {
        return condition(kl, obs, ConditionOptions{nugget});
      },
      py::arg("kl"), py::arg("observations"), py::arg("nugget") = 0.0);

  py::class_<QuadratureRule>(m, "QuadratureRule")
      .def_readonly("nodes", &QuadratureRule::nodes)
      .def_readonly("weights", &QuadratureRule::weights)
      .def_readonly("tag", &QuadratureRule::tag)
      .def("__len__", &QuadratureRule::size);
  m.def("gauss_hermite", &gauss_hermite, py::arg("q"));
  m.def("gauss_hermite_tensor", &gauss_hermite_tensor, py::arg("d"), py::arg("q"),
        py::arg("max_nodes") = kDefaultNodeBudget);
  m.def("smolyak_sparse", &smolyak_sparse, py::arg("d"), py::arg("level"));
  m.def("hermite", &hermite, py::arg("n"), py::arg("x"));
  m.def(
      "total_degree_indices", [](std::size_t d, int P) { return total_degree_indices(d, P).indices; },
      py::arg("d"), py::arg("degree"));

  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return to_python(config_to_json(preset(name))); });
  m.def(
      "run",
      [](const py::object& config, std::optional<std::filesystem::path> out) {
        const ExperimentConfig c = config_from_json(from_python(config));
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c, out);
        }
        return to_python(r.report);
      },
      py::arg("config"), py::arg("out") = py::none(),
      "Run every stage for a config dict and return the report dict.");

  py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);
}
