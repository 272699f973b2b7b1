#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "kdde/dataset.hpp"
#include "kdde/dictionary.hpp"
#include "kdde/edmd.hpp"
#include "kdde/encoder.hpp"
#include "kdde/error.hpp"
#include "kdde/eval.hpp"
#include "kdde/experiments.hpp"
#include "kdde/mesh.hpp"
#include "kdde/model.hpp"

namespace py = pybind11;
using namespace kdde;

namespace {

Box box_from(const std::optional<std::pair<Vector, Vector>>& bounds, const Box& fallback) {
  if (!bounds) return fallback;
  return Box{bounds->first, bounds->second};
}

TransitionDataset dataset_from(const Matrix& current, const Matrix& next) {
  TransitionDataset d{current, next, nlohmann::json::object()};
  d.validate();
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict out;
  out["total_sse"] = r.total_sse;
  out["sse_variance"] = r.sse_variance;
  out["mean_sse"] = r.mean_sse;
  out["cells_in_range"] = r.cells_in_range;
  out["shape"] = r.shape;
  out["cell_centers"] = r.cell_centers;
  out["cell_sse"] = r.cell_sse;
  std::vector<bool> mask(r.mask.begin(), r.mask.end());
  out["mask"] = mask;
  return out;
}

}  // namespace

PYBIND11_MODULE(_kdde, m) {
  m.doc() = "Koopman models by data-driven encoding (DDE) and EDMD";

  static py::exception<kdde::Error> kdde_error(m, "KddeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const kdde::Error& e) {
      PyErr_SetString(kdde_error.ptr(), e.what());
    }
  });

  m.def(
      "generate",
      [](const std::string& kind, Eigen::Index n, std::uint64_t seed, std::optional<Eigen::Vector2d> center,
         std::optional<std::pair<Vector, Vector>> bounds, int border, int trajectories) {
        DatasetSpec spec;
        spec.kind = parse_dataset_kind(kind);
        spec.size = n;
        spec.seed = seed;
        if (center) spec.center = *center;
        spec.bounds = box_from(bounds, spec.bounds);
        spec.border_count = border;
        spec.n_trajectories = trajectories;
        const TransitionDataset d = generate(spec);
        return py::make_tuple(d.current, d.next, d.provenance.dump());
      },
      py::arg("kind"), py::arg("n"), py::arg("seed") = 7, py::arg("center") = py::none(),
      py::arg("bounds") = py::none(), py::arg("border") = 100, py::arg("trajectories") = 100,
      "Pendulum transitions: (current, next, provenance JSON).");

  m.def(
      "pendulum_step", [](const Matrix& states) { return pendulum_step_rows(PendulumParams{}, states); },
      py::arg("states"));

  m.def(
      "read_dataset",
      [](const std::string& path) {
        const TransitionDataset d = read_dataset_csv(path);
        return py::make_tuple(d.current, d.next);
      },
      py::arg("path"));
  m.def(
      "write_dataset",
      [](const Matrix& current, const Matrix& next, const std::string& path) {
        write_dataset_csv(dataset_from(current, next), path);
      },
      py::arg("current"), py::arg("next"), py::arg("path"));

  py::class_<Dictionary>(m, "Dictionary")
      .def_static("state_only", &Dictionary::state_only, py::arg("input_dim"))
      .def_static(
          "rbf_grid",
          [](const Vector& lo, const Vector& hi, const std::vector<int>& grid, double factor) {
            return make_rbf_grid(Box{lo, hi}, grid, SpacingScaled{factor});
          },
          py::arg("lo"), py::arg("hi"), py::arg("grid"), py::arg("width_factor") = 1.0)
      .def_static(
          "from_spec",
          [](const std::string& spec, const Matrix& current) {
            return DictionarySpec::parse(spec).build(dataset_from(current, current));
          },
          py::arg("spec"), py::arg("current"), "'state', 'rbf:AxB[:factor]' or 'mlp:weights.json'.")
      .def_static(
          "from_json", [](const std::string& text) { return Dictionary::from_json(nlohmann::json::parse(text)); },
          py::arg("text"))
      .def_property_readonly("input_dim", &Dictionary::input_dim)
      .def_property_readonly("output_dim", &Dictionary::output_dim)
      .def_property_readonly("state_inclusive", &Dictionary::state_inclusive)
      .def("lift", &Dictionary::lift_rows, py::arg("states"))
      .def("to_json", [](const Dictionary& d) { return d.to_json().dump(); });

  m.def(
      "mlp_forward",
      [](const std::string& weights_json, const Matrix& states) {
        const MlpWeights w = parse_mlp_weights(nlohmann::json::parse(weights_json));
        Matrix out(states.rows(), w.output_dim());
        for (Eigen::Index i = 0; i < states.rows(); ++i) out.row(i) = mlp_forward(w, states.row(i).transpose());
        return out;
      },
      py::arg("weights_json"), py::arg("states"), "Hidden-stack outputs for every row.");

  py::class_<SimplicialMesh, std::shared_ptr<SimplicialMesh>>(m, "Mesh")
      .def_readonly("dim", &SimplicialMesh::dim)
      .def_readonly("nodes", &SimplicialMesh::nodes)
      .def_readonly("simplices", &SimplicialMesh::simplices)
      .def_readonly("simplex_volumes", &SimplicialMesh::simplex_volumes)
      .def_readonly("node_volumes", &SimplicialMesh::node_volumes)
      .def_readonly("hull_volume", &SimplicialMesh::hull_volume)
      .def_readonly("node_of_sample", &SimplicialMesh::node_of_sample)
      .def("contains", [](const SimplicialMesh& s, const Vector& x) { return s.contains(x); }, py::arg("x"));
  m.def(
      "build_mesh", [](const Matrix& points) { return std::make_shared<SimplicialMesh>(build_mesh(points)); },
      py::arg("points"));

  py::class_<KoopmanModel>(m, "Model")
      .def_readonly("A", &KoopmanModel::A)
      .def_readonly("dictionary", &KoopmanModel::dictionary)
      .def_property_readonly("method", [](const KoopmanModel& k) { return to_string(k.method); })
      .def_property_readonly("R", [](const KoopmanModel& k) -> std::optional<Matrix> {
        if (!k.grams) return std::nullopt;
        return k.grams->R;
      })
      .def_property_readonly("Q", [](const KoopmanModel& k) -> std::optional<Matrix> {
        if (!k.grams) return std::nullopt;
        return k.grams->Q;
      })
      .def("predict", &predict_one_step, py::arg("states"), "One-step state predictions per row.")
      .def(
          "rollout",
          [](const KoopmanModel& k, const Vector& x, int steps, bool relift) {
            const auto states = predict(k, x, steps, relift ? Rollout::Relift : Rollout::Lifted);
            Matrix out(static_cast<Eigen::Index>(states.size()), x.size());
            for (std::size_t i = 0; i < states.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
            return out;
          },
          py::arg("x"), py::arg("steps"), py::arg("relift") = false)
      .def("to_json", [](const KoopmanModel& k) { return k.to_json().dump(); })
      .def_static(
          "from_json", [](const std::string& text) { return KoopmanModel::from_json(nlohmann::json::parse(text)); },
          py::arg("text"))
      .def("save", [](const KoopmanModel& k, const std::string& path) { write_model(k, path); }, py::arg("path"))
      .def_static("load", [](const std::string& path) { return read_model(path); }, py::arg("path"));

  m.def(
      "fit",
      [](const std::string& method, const Matrix& current, const Matrix& next, const Dictionary& dict, double ridge,
         double rcond) {
        return fit(parse_fit_method(method), dataset_from(current, next), dict, FitSettings{ridge, rcond});
      },
      py::arg("method"), py::arg("current"), py::arg("next"), py::arg("dictionary"), py::arg("ridge") = 0.0,
      py::arg("rcond") = 1e-12);

  m.def(
      "sse_grid",
      [](const KoopmanModel& model, std::optional<std::pair<Vector, Vector>> bounds, std::optional<Matrix> hull_points,
         const std::vector<int>& grid) {
        const DatasetSpec defaults;
        EvalDomain domain = hull_points ? EvalDomain::hull_of(*hull_points)
                                        : EvalDomain::rectangle(box_from(bounds, defaults.bounds));
        if (hull_points && bounds) domain.box = box_from(bounds, domain.box);
        return report_dict(sse_grid(model, PendulumParams{}, domain, grid));
      },
      py::arg("model"), py::arg("bounds") = py::none(), py::arg("hull_points") = py::none(),
      py::arg("grid") = std::vector<int>{100, 100},
      "One-step SSE against the pendulum map on a cell-centered grid. Pass hull_points to mask cells "
      "outside their convex hull.");
}
