#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdde/dynamics.hpp"
#include "kdde/mesh.hpp"
#include "kdde/model.hpp"

namespace kdde {

/// Region over which prediction error is measured: a box, optionally
/// masked to the convex hull of a point set.
struct EvalDomain {
  Box box;
  std::shared_ptr<const SimplicialMesh> hull;

  static EvalDomain rectangle(const Box& box);
  /// Bounding box of `points`, masked to their convex hull.
  static EvalDomain hull_of(const Matrix& points);

  bool contains(const Eigen::Ref<const Vector>& x) const;
};

/// Per-cell one-step squared error on a regular grid of cells; each cell is
/// evaluated at its center. Cells are stored row-major (last axis fastest).
struct EvalReport {
  std::vector<int> shape;
  Box box;
  Matrix cell_centers;     // C x n
  Vector cell_sse;         // C, zero outside the domain
  std::vector<char> mask;  // C, 1 when the cell center lies inside the domain
  double total_sse = 0.0;
  double sse_variance = 0.0;  // population variance over masked cells
  double mean_sse = 0.0;
  Eigen::Index cells_in_range = 0;
  nlohmann::json model_meta = nlohmann::json::object();

  nlohmann::json summary_json() const;
  /// CSV columns: cell index, center coordinates, sse, in_range.
  void write_csv(const std::filesystem::path& path) const;
};

using TruthMap = std::function<Vector(const Vector&)>;

/// SSE(x) = || state_readout(A z(x)) - f(x) ||^2 at every cell center inside
/// the domain. Throws NotStateInclusive.
EvalReport sse_grid(const KoopmanModel& model, const TruthMap& truth, const EvalDomain& domain,
                    std::span<const int> resolution);

EvalReport sse_grid(const KoopmanModel& model, const PendulumParams& truth, const EvalDomain& domain,
                    std::span<const int> resolution);

/// Total and population variance of the masked cells only.
void summarize(EvalReport& report);

struct ConvergenceSelector {
  int row = 0;
  int col = 0;
  std::string label;
};

struct ConvergenceTrace {
  std::vector<Eigen::Index> sizes;
  std::vector<ConvergenceSelector> selectors;
  Matrix q_values;  // sizes x selectors
  Matrix r_values;  // sizes x selectors

  /// |v(last) - v(second to last)| / |v(second to last)| per selector.
  Vector last_relative_change() const;
  /// CSV rows: N,entry_id,value (Q entries, then R entries prefixed "R").
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace kdde
