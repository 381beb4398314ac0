#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spectrum/dynamics_analysis.hpp"
#include "spectrum/scenario.hpp"
#include "spectrum/stackelberg.hpp"
#include "spectrum/type1_dynamic.hpp"
#include "spectrum/type1_static.hpp"
#include "spectrum/type2_game.hpp"

namespace py = pybind11;
using namespace spectrum;

namespace {

CapacitySpec caps_from(const std::vector<double>& q) { return CapacitySpec{q}; }

Matrix trajectory_matrix(const std::vector<PriceVector>& t) {
  Matrix m(static_cast<Eigen::Index>(t.size()), t.empty() ? 0 : static_cast<Eigen::Index>(t.front().size()));
  for (std::size_t k = 0; k < t.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = t[k].vec().transpose();
  return m;
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict orbit_dict(const OrbitRecord& o) {
  py::dict d;
  d["trajectory"] = trajectory_matrix(o.trajectory);
  d["converged"] = o.converged;
  d["iterations"] = o.iterations();
  d["limit"] = o.limit ? py::cast(o.limit->vec()) : py::none();
  d["escapes"] = o.escapes;
  return d;
}

}  // namespace

PYBIND11_MODULE(spectrum_market, m) {
  m.doc() = "Spectrum pricing games between primary users";
  m.attr("__version__") = std::string(kArtifactVersion);
  m.attr("UNLIMITED") = kUnlimited;

  static py::exception<Error> error(m, "SpectrumError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  py::class_<DemandModel>(m, "DemandModel")
      .def(py::init([](Vector a, Vector b, Matrix c) { return DemandModel::from_coefficients(a, b, c); }),
           py::arg("a"), py::arg("b"), py::arg("c"))
      .def_static("duopoly", &DemandModel::duopoly, py::arg("a1"), py::arg("a2"), py::arg("b1"), py::arg("b2"),
                  py::arg("c"))
      .def_static(
          "from_utility",
          [](std::vector<double> alpha, std::vector<double> beta, double mu) {
            return derive_demand_model(MarketParameters{std::move(alpha), std::move(beta), mu});
          },
          py::arg("alpha"), py::arg("beta"), py::arg("mu"))
      .def_readonly("a", &DemandModel::a)
      .def_readonly("b", &DemandModel::b)
      .def_readonly("c", &DemandModel::c)
      .def("demand", [](const DemandModel& self, Vector p) { return demand(self, PriceVector(p)).vec(); })
      .def("__len__", &DemandModel::size);

  py::class_<EquilibriumResult>(m, "Equilibrium")
      .def_property_readonly("prices", [](const EquilibriumResult& r) { return r.prices.vec(); })
      .def_property_readonly("demands", [](const EquilibriumResult& r) { return r.demands.vec(); })
      .def_readonly("payoffs", &EquilibriumResult::payoffs)
      .def_readonly("binding", &EquilibriumResult::binding)
      .def_property_readonly("case", [](const EquilibriumResult& r) { return std::string(to_string(r.case_label)); });

  m.def("duopoly_ne", [](const DemandModel& model, std::vector<double> caps) { return duopoly_ne(model, caps_from(caps)); },
        py::arg("model"), py::arg("caps"));
  m.def(
      "oligopoly_ne",
      [](const DemandModel& model, std::vector<double> caps) { return oligopoly_ne_search(model, caps_from(caps)).result; },
      py::arg("model"), py::arg("caps"));
  m.def(
      "ne_verify",
      [](const DemandModel& model, std::vector<double> caps, const EquilibriumResult& r, std::size_t points) {
        return ne_verify(model, caps_from(caps), r, DeviationGrid{points, 2.0}).ok;
      },
      py::arg("model"), py::arg("caps"), py::arg("result"), py::arg("points") = 400);

  m.def(
      "stackelberg_ne",
      [](const DemandModel& model, std::vector<double> caps, std::size_t leader) {
        const StackelbergResult r = stackelberg_ne(model, caps_from(caps), leader);
        py::dict d;
        d["prices"] = r.prices.vec();
        d["demands"] = r.demands.vec();
        d["payoffs"] = r.payoffs;
        d["case"] = std::string(to_string(r.case_label));
        return d;
      },
      py::arg("model"), py::arg("caps"), py::arg("leader"));

  m.def(
      "type2_ne",
      [](const DemandModel& model, std::vector<double> caps, double theta) {
        Type2Config cfg;
        cfg.theta = theta;
        cfg.caps = caps_from(caps);
        const Type2Solution s = type2_oligopoly_ne(Market::from_demand(model), cfg);
        py::dict d;
        d["prices"] = s.result.prices.vec();
        d["demands"] = s.result.demands.vec();
        d["utilities"] = s.result.payoffs;
        d["z_star"] = s.aggregate.z_star;
        return d;
      },
      py::arg("model"), py::arg("caps"), py::arg("theta"));

  m.def(
      "strict_best_run",
      [](const DemandModel& model, std::vector<double> caps, Vector p0, double tol, std::size_t max_iter) {
        return orbit_dict(strict_best_run(model, caps_from(caps), PriceVector(p0), tol, max_iter));
      },
      py::arg("model"), py::arg("caps"), py::arg("p0"), py::arg("tol") = 1e-6, py::arg("max_iter") = 200);
  m.def(
      "strict_br_run",
      [](const DemandModel& model, std::vector<double> caps, std::array<double, 2> gamma, Vector p0,
         std::size_t steps, std::uint64_t seed) {
        StrictBrMap map(model, caps_from(caps), LearningRates{gamma}, seed);
        return orbit_dict(map.run(PriceVector(p0), steps));
      },
      py::arg("model"), py::arg("caps"), py::arg("gamma"), py::arg("p0"), py::arg("steps"), py::arg("seed") = 0);
  m.def(
      "lyapunov_max",
      [](const DemandModel& model, std::vector<double> caps, std::array<double, 2> gamma, Vector p0,
         std::size_t n_iter, std::size_t transient, std::uint64_t seed) {
        return lyapunov_max(model, caps_from(caps), LearningRates{gamma}, PriceVector(p0), n_iter, transient, seed);
      },
      py::arg("model"), py::arg("caps"), py::arg("gamma"), py::arg("p0"), py::arg("n_iter") = 50000,
      py::arg("transient") = 1000, py::arg("seed") = 0);
  m.def(
      "attractor",
      [](const DemandModel& model, std::vector<double> caps, std::array<double, 2> gamma, Vector p0,
         std::size_t n_points, std::size_t transient, std::uint64_t seed) {
        const PointCloud c =
            attractor_capture(model, caps_from(caps), LearningRates{gamma}, PriceVector(p0), n_points, transient, seed);
        Matrix out(static_cast<Eigen::Index>(c.size()), 2);
        for (std::size_t k = 0; k < c.size(); ++k) {
          out(static_cast<Eigen::Index>(k), 0) = c[k][0];
          out(static_cast<Eigen::Index>(k), 1) = c[k][1];
        }
        return out;
      },
      py::arg("model"), py::arg("caps"), py::arg("gamma"), py::arg("p0"), py::arg("n_points") = 10000,
      py::arg("transient") = 1000, py::arg("seed") = 0);

  m.def(
      "load_scenario",
      [](const std::filesystem::path& path) {
        const ScenarioConfig cfg = load_scenario(path);
        py::dict d;
        d["name"] = cfg.name;
        d["game"] = std::string(to_string(cfg.game));
        d["hash"] = cfg.hash();
        d["config"] = from_json(cfg.to_json());
        return d;
      },
      py::arg("path"));
  m.def(
      "run_scenario",
      [](const std::filesystem::path& path, const std::filesystem::path& out_dir) {
        return from_json(run_scenario(load_scenario(path), out_dir).to_json());
      },
      py::arg("path"), py::arg("out_dir"));
}
