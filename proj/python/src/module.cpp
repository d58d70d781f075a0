#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shapead/cases.hpp"
#include "shapead/error.hpp"

namespace py = pybind11;
using namespace shapead;

namespace {

// Reports cross the boundary as JSON text; the Python side parses them.
std::string dump(const nlohmann::json& j) { return j.dump(); }

std::map<EdgeKey, int> to_markers(const std::map<std::pair<int, int>, int>& m) {
  std::map<EdgeKey, int> out;
  for (const auto& [e, tag] : m) out[make_edge(e.first, e.second)] = tag;
  return out;
}

// Reduced functional plus the recorded model that owns its tape.
template <class Model>
struct Recorded {
  Model model;

  ReducedFunctional& rf() { return *model.rf; }
};

template <class Model>
void bind_recorded(py::module_& m, const char* name) {
  using R = Recorded<Model>;
  py::class_<R, std::shared_ptr<R>>(m, name)
      .def_property_readonly("J", [](R& r) { return r.rf().value(); })
      .def_property_readonly("num_controls", [](R& r) { return r.rf().num_controls(); })
      .def_property_readonly("mesh", [](R& r) { return r.model.mesh; })
      .def("control_values", [](R& r) { return r.rf().control_values(); })
      .def("__call__", [](R& r, const ControlValues& v) { return r.rf()(v); }, py::arg("values"))
      .def("derivative", [](R& r) { return r.rf().derivative(); })
      .def("tlm", [](R& r, const ControlValues& d) { return r.rf().tlm(d); }, py::arg("directions"))
      .def("hessian", [](R& r, const ControlValues& d) { return r.rf().hessian(d); }, py::arg("directions"))
      .def(
          "taylor",
          [](R& r, const ControlValues& d, double h0, int halvings, bool second) {
            return dump(taylor_report(taylor_test(r.rf(), r.rf().control_values(), d, h0, halvings, second)));
          },
          py::arg("directions"), py::arg("h0"), py::arg("halvings") = 3, py::arg("second_order") = true);
}

}  // namespace

PYBIND11_MODULE(_shapead, m) {
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<Mesh, std::shared_ptr<Mesh>>(m, "Mesh")
      .def(py::init([](std::vector<Point> v, std::vector<CellVertices> c, std::map<std::pair<int, int>, int> markers) {
             return std::make_shared<Mesh>(std::move(v), std::move(c), to_markers(markers));
           }),
           py::arg("vertices"), py::arg("cells"), py::arg("facet_markers") = std::map<std::pair<int, int>, int>{})
      .def_property_readonly("num_vertices", &Mesh::num_vertices)
      .def_property_readonly("num_cells", &Mesh::num_cells)
      .def_property_readonly("vertices", &Mesh::vertices)
      .def_property_readonly("cells", &Mesh::cells)
      .def("area", &Mesh::total_area)
      .def("min_quality", &Mesh::min_quality)
      .def("report", [](const Mesh& mesh) { return dump(mesh_report(mesh)); });

  m.def("annulus_mesh", &annulus_mesh, py::arg("outer_radius") = 1.0, py::arg("hole_radius") = 0.2,
        py::arg("hole_center") = Point{0.5, 0.0}, py::arg("n_angular") = 64, py::arg("n_radial") = 16);
  m.def("channel_mesh", &channel_mesh, py::arg("center") = Point{0.5, 0.5}, py::arg("radius") = 0.13,
        py::arg("n_angular") = 64, py::arg("n_radial") = 14, py::arg("grading") = 1.5);
  m.def("load_mesh", [](const std::string& path) { return load_mesh(path); });

  bind_recorded<TubeModel>(m, "TubeModel");
  bind_recorded<PironneauModel>(m, "PironneauModel");

  m.def(
      "record_tube",
      [](const std::string& variant, double T, double dt, double k, double omega, int n_angular, int n_radial,
         std::shared_ptr<Mesh> mesh) {
        TubeConfig c;
        c.variant = parse_tube_variant(variant);
        c.T = T;
        c.dt = dt;
        c.k = k;
        c.omega = omega;
        c.n_angular = n_angular;
        c.n_radial = n_radial;
        c.mesh = std::move(mesh);
        return std::make_shared<Recorded<TubeModel>>(Recorded<TubeModel>{record_tube(c)});
      },
      py::arg("variant") = "frozen", py::arg("T") = 0.5, py::arg("dt") = 0.01, py::arg("k") = 0.01,
      py::arg("omega") = 0.25, py::arg("n_angular") = 64, py::arg("n_radial") = 16, py::arg("mesh") = nullptr);

  m.def(
      "record_pironneau",
      [](const std::string& pipeline, double alpha, double beta, int n_angular, int n_radial,
         std::shared_ptr<Mesh> mesh) {
        PironneauConfig c;
        c.alpha = alpha;
        c.beta = beta;
        c.n_angular = n_angular;
        c.n_radial = n_radial;
        c.mesh = std::move(mesh);
        return std::make_shared<Recorded<PironneauModel>>(
            Recorded<PironneauModel>{record_pironneau(c, parse_pironneau_pipeline(pipeline))});
      },
      py::arg("pipeline") = "through-deformation", py::arg("alpha") = 1e4, py::arg("beta") = 1e4,
      py::arg("n_angular") = 64, py::arg("n_radial") = 14, py::arg("mesh") = nullptr);

  m.def("tube_test_directions", [](Recorded<TubeModel>& r) { return tube_test_directions(r.model); });
  m.def("pironneau_directions", [](Recorded<PironneauModel>& r, std::uint64_t seed) {
    return pironneau_smooth_directions(r.model, seed);
  }, py::arg("model"), py::arg("seed") = 1);
}
