#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdde/delaunay.hpp"
#include "kdde/types.hpp"

namespace kdde {

/// Result of merging near-coincident samples.
struct Deduplication {
  Matrix nodes;                             // K x n, coordinates of each cluster's first sample
  std::vector<Eigen::Index> node_of_sample;  // N entries, sample -> node
  std::vector<Eigen::Index> multiplicity;    // K entries
  double tolerance = 0.0;                   // absolute merge radius actually used
};

/// Merges samples closer than `relative_tolerance` x bounding-box diagonal.
/// Clusters are closed transitively; nodes are numbered by first occurrence,
/// so an input without duplicates maps to itself.
Deduplication deduplicate(const Matrix& points, double relative_tolerance = 1e-10);

struct MeshOptions {
  double dedup_relative_tolerance = 1e-10;
  /// Simplices smaller than this fraction of the hull volume are dropped.
  double sliver_relative_volume = 1e-12;
};

/// Delaunay partition of the convex hull of a point cloud, with the
/// quadrature weights attached to simplices and nodes.
struct SimplicialMesh {
  int dim = 0;
  Matrix nodes;                             // K x n
  IndexMatrix simplices;                    // P x (n+1), positively oriented
  Vector simplex_volumes;                   // P
  Vector node_volumes;                      // K
  double hull_volume = 0.0;
  IndexMatrix hull_facets;                  // F x (n+1), kInfiniteVertex marks the open side
  std::vector<Eigen::Index> node_of_sample;  // input sample -> node
  std::size_t dropped_slivers = 0;

  Eigen::Index node_count() const { return nodes.rows(); }
  Eigen::Index simplex_count() const { return simplices.rows(); }
  Eigen::Index sample_count() const { return static_cast<Eigen::Index>(node_of_sample.size()); }

  /// Vertex coordinates of simplex p, (n+1) x n.
  Matrix simplex_vertices(Eigen::Index p) const;

  /// True when x lies in the convex hull, allowing `relative_tolerance`
  /// (scaled by the facet size) outside each facet.
  bool contains(const Eigen::Ref<const Vector>& x, double relative_tolerance = 1e-9) const;

  nlohmann::json to_json() const;
};

/// Deduplicates, triangulates, drops slivers (rescaling the survivors so
/// they still sum to the hull volume) and fills node volumes.
/// Throws TooFewPoints / DegenerateInput.
SimplicialMesh build_mesh(const Matrix& points, const MeshOptions& options = {});

/// |det[v1 - v0, ..., vn - v0]| / n! for (n+1) x n vertex rows.
double simplex_volume(const Matrix& vertices);

/// Each simplex hands Δv_p / (n+1) to each of its vertices.
Vector node_volumes(const SimplicialMesh& mesh);

struct RefinementMetric {
  Vector per_simplex;  // max centroid-to-vertex distance
  double global_max = 0.0;
};

RefinementMetric refinement_metric(const SimplicialMesh& mesh);

}  // namespace kdde
