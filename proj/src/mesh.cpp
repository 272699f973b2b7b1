#include "kdde/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

#include "kdde/error.hpp"
#include "kdde/log.hpp"

namespace kdde {

namespace {

struct DisjointSets {
  std::vector<Eigen::Index> parent;
  explicit DisjointSets(Eigen::Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  }
  Eigen::Index find(Eigen::Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  }
  void unite(Eigen::Index a, Eigen::Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;  // smallest index is the root
  }
};

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace

Deduplication deduplicate(const Matrix& points, double relative_tolerance) {
  const Eigen::Index count = points.rows();
  const Eigen::Index dim = points.cols();
  Deduplication out;
  if (count == 0) {
    out.nodes = Matrix(0, dim);
    return out;
  }
  if (!points.allFinite()) throw Error(ErrorCode::NonFiniteInput, "points contain NaN or Inf");
  const double diag = (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
  const double tol = relative_tolerance * diag;
  out.tolerance = tol;

  // Sweep along a generic direction: |u.(a-b)| <= |a-b| bounds the window.
  Vector dir(dim);
  for (Eigen::Index d = 0; d < dim; ++d) dir(d) = std::pow(1.6180339887498949, static_cast<double>(d)) + 0.1 * static_cast<double>(d);
  dir.normalize();
  const Vector key = points * dir;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });

  DisjointSets sets(count);
  const double tol2 = tol * tol;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const Eigen::Index i = order[a];
    for (std::size_t b = a; b-- > 0;) {
      const Eigen::Index j = order[b];
      if (key(i) - key(j) > tol) break;
      if ((points.row(i) - points.row(j)).squaredNorm() <= tol2) sets.unite(i, j);
    }
  }

  std::vector<Eigen::Index> node_of_root(static_cast<std::size_t>(count), -1);
  out.node_of_sample.resize(static_cast<std::size_t>(count));
  std::vector<Eigen::Index> firsts;
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index root = sets.find(i);
    auto& node = node_of_root[static_cast<std::size_t>(root)];
    if (node < 0) {
      node = static_cast<Eigen::Index>(firsts.size());
      firsts.push_back(i);
      out.multiplicity.push_back(0);
    }
    out.node_of_sample[static_cast<std::size_t>(i)] = node;
    ++out.multiplicity[static_cast<std::size_t>(node)];
  }
  out.nodes.resize(static_cast<Eigen::Index>(firsts.size()), dim);
  for (std::size_t k = 0; k < firsts.size(); ++k) out.nodes.row(static_cast<Eigen::Index>(k)) = points.row(firsts[k]);
  return out;
}

double simplex_volume(const Matrix& vertices) {
  const Eigen::Index n = vertices.cols();
  if (vertices.rows() != n + 1)
    throw Error(ErrorCode::DimensionMismatch, "a simplex in R^" + std::to_string(n) + " needs " +
                                                  std::to_string(n + 1) + " vertices");
  Matrix edges(n, n);
  for (Eigen::Index i = 0; i < n; ++i) edges.row(i) = vertices.row(i + 1) - vertices.row(0);
  const double det = n == 1 ? edges(0, 0) : n == 2 ? edges(0, 0) * edges(1, 1) - edges(0, 1) * edges(1, 0)
                                                    : edges.partialPivLu().determinant();
  return std::abs(det) / factorial(static_cast<int>(n));
}

Matrix SimplicialMesh::simplex_vertices(Eigen::Index p) const {
  Matrix v(dim + 1, dim);
  for (int k = 0; k <= dim; ++k) v.row(k) = nodes.row(simplices(p, k));
  return v;
}

Vector node_volumes(const SimplicialMesh& mesh) {
  Vector vol = Vector::Zero(mesh.node_count());
  const double share = 1.0 / (mesh.dim + 1);
  for (Eigen::Index p = 0; p < mesh.simplex_count(); ++p)
    for (int k = 0; k <= mesh.dim; ++k) vol(mesh.simplices(p, k)) += mesh.simplex_volumes(p) * share;
  return vol;
}

RefinementMetric refinement_metric(const SimplicialMesh& mesh) {
  RefinementMetric metric;
  metric.per_simplex.resize(mesh.simplex_count());
  for (Eigen::Index p = 0; p < mesh.simplex_count(); ++p) {
    const Matrix v = mesh.simplex_vertices(p);
    const Eigen::RowVectorXd centroid = v.colwise().mean();
    metric.per_simplex(p) = (v.rowwise() - centroid).rowwise().norm().maxCoeff();
  }
  metric.global_max = mesh.simplex_count() > 0 ? metric.per_simplex.maxCoeff() : 0.0;
  return metric;
}

bool SimplicialMesh::contains(const Eigen::Ref<const Vector>& x, double relative_tolerance) const {
  if (x.size() != dim) throw Error(ErrorCode::DimensionMismatch, "query has the wrong dimension");
  if (dim == 2) {
    for (Eigen::Index f = 0; f < hull_facets.rows(); ++f) {
      double v[3][2];
      for (int k = 0; k < 3; ++k) {
        const int idx = hull_facets(f, k);
        v[k][0] = idx == kInfiniteVertex ? x(0) : nodes(idx, 0);
        v[k][1] = idx == kInfiniteVertex ? x(1) : nodes(idx, 1);
      }
      const double ax = v[1][0] - v[0][0], ay = v[1][1] - v[0][1];
      const double bx = v[2][0] - v[0][0], by = v[2][1] - v[0][1];
      const double det = ax * by - ay * bx;
      if (det > relative_tolerance * std::sqrt((ax * ax + ay * ay) * (bx * bx + by * by))) return false;
    }
    return true;
  }
  Matrix edges(dim, dim);
  for (Eigen::Index f = 0; f < hull_facets.rows(); ++f) {
    // Orientation with the query substituted for the infinite vertex.
    Matrix v(dim + 1, dim);
    for (int k = 0; k <= dim; ++k) {
      const int idx = hull_facets(f, k);
      if (idx == kInfiniteVertex)
        v.row(k) = x.transpose();
      else
        v.row(k) = nodes.row(idx);
    }
    double bound = 1.0;
    for (int i = 0; i < dim; ++i) {
      edges.row(i) = v.row(i + 1) - v.row(0);
      bound *= edges.row(i).norm();
    }
    const double det = dim == 1 ? edges(0, 0) : dim == 2 ? edges(0, 0) * edges(1, 1) - edges(0, 1) * edges(1, 0)
                                                          : edges.partialPivLu().determinant();
    if (det > relative_tolerance * bound) return false;
  }
  return true;
}

nlohmann::json SimplicialMesh::to_json() const {
  using nlohmann::json;
  json j;
  j["dim"] = dim;
  json nodes_j = json::array();
  for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index d = 0; d < nodes.cols(); ++d) row.push_back(nodes(i, d));
    nodes_j.push_back(row);
  }
  json simp = json::array();
  for (Eigen::Index p = 0; p < simplices.rows(); ++p) {
    json row = json::array();
    for (Eigen::Index k = 0; k < simplices.cols(); ++k) row.push_back(simplices(p, k));
    simp.push_back(row);
  }
  j["nodes"] = nodes_j;
  j["simplices"] = simp;
  j["simplex_volumes"] = std::vector<double>(simplex_volumes.data(), simplex_volumes.data() + simplex_volumes.size());
  j["node_volumes"] = std::vector<double>(node_volumes.data(), node_volumes.data() + node_volumes.size());
  j["hull_volume"] = hull_volume;
  j["dropped_slivers"] = dropped_slivers;
  return j;
}

SimplicialMesh build_mesh(const Matrix& points, const MeshOptions& options) {
  const auto dim = static_cast<int>(points.cols());
  if (dim < 1) throw Error(ErrorCode::DimensionMismatch, "points must have at least one coordinate");
  if (points.rows() < dim + 1)
    throw Error(ErrorCode::TooFewPoints, std::to_string(points.rows()) + " points cannot span a " +
                                             std::to_string(dim) + "-simplex");
  if (dim > 8)
    warn("building a Delaunay mesh in " + std::to_string(dim) +
         " dimensions; cost grows steeply and volumes become numerically fragile above 8 dimensions");

  Deduplication dedup = deduplicate(points, options.dedup_relative_tolerance);
  if (dedup.nodes.rows() < dim + 1)
    throw Error(ErrorCode::TooFewPoints, "only " + std::to_string(dedup.nodes.rows()) +
                                             " distinct points remain after merging duplicates");

  SimplicialMesh mesh;
  mesh.dim = dim;
  mesh.nodes = std::move(dedup.nodes);
  mesh.node_of_sample = std::move(dedup.node_of_sample);

  DelaunayTriangulation tri(mesh.nodes);
  IndexMatrix all = tri.finite_simplices();
  mesh.hull_facets = tri.hull_facets();

  Vector volumes(all.rows());
  for (Eigen::Index p = 0; p < all.rows(); ++p) {
    Matrix v(dim + 1, dim);
    for (int k = 0; k <= dim; ++k) v.row(k) = mesh.nodes.row(all(p, k));
    volumes(p) = simplex_volume(v);
  }
  mesh.hull_volume = volumes.sum();
  if (!(mesh.hull_volume > 0.0)) throw Error(ErrorCode::DegenerateInput, "convex hull has zero volume");

  const double cutoff = options.sliver_relative_volume * mesh.hull_volume;
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(all.rows()));
  for (Eigen::Index p = 0; p < all.rows(); ++p)
    if (volumes(p) >= cutoff) keep.push_back(p);
  mesh.dropped_slivers = static_cast<std::size_t>(all.rows()) - keep.size();

  mesh.simplices.resize(static_cast<Eigen::Index>(keep.size()), dim + 1);
  mesh.simplex_volumes.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    mesh.simplices.row(static_cast<Eigen::Index>(r)) = all.row(keep[r]);
    mesh.simplex_volumes(static_cast<Eigen::Index>(r)) = volumes(keep[r]);
  }
  if (mesh.dropped_slivers > 0) mesh.simplex_volumes *= mesh.hull_volume / mesh.simplex_volumes.sum();

  mesh.node_volumes = node_volumes(mesh);
  return mesh;
}

}  // namespace kdde
