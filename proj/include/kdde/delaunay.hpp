#pragma once

#include <cstdint>
#include <vector>

#include "kdde/types.hpp"

namespace kdde {

using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Marks the vertex at infinity inside hull-facet tuples.
inline constexpr int kInfiniteVertex = -1;

/// Filtered geometric predicates in R^n, evaluated in extended precision.
///
/// A determinant whose magnitude is below `relative_tolerance` times its
/// Hadamard bound is reported as zero. Callers resolve zeros the same way
/// every time, which is what keeps the triangulation reproducible on
/// cocircular and collinear inputs.
class Predicates {
 public:
  explicit Predicates(int dim, double relative_tolerance = 1e-13);

  int dim() const { return dim_; }

  /// Sign of det[v1 - v0, ..., vn - v0]; `vertices` holds n+1 pointers.
  int orientation(const double* const* vertices) const;

  /// +1 when `query` lies strictly inside the circumsphere of the
  /// positively oriented simplex `vertices`, -1 outside, 0 on it.
  int in_sphere(const double* const* vertices, const double* query) const;

 private:
  long double det(std::vector<long double>& a, int size) const;

  int dim_;
  double tol_;
  int sphere_sign_;
  mutable std::vector<long double> scratch_;
};

/// Incremental Bowyer-Watson Delaunay triangulation in any dimension >= 1.
///
/// The convex hull is closed by "ghost" simplices that join each hull facet
/// to a symbolic vertex at infinity, so the finite simplices always tile the
/// exact convex hull of the input (no bounding super-simplex to strip).
/// Points must be pairwise distinct.
class DelaunayTriangulation {
 public:
  explicit DelaunayTriangulation(const Matrix& points);

  int dim() const { return dim_; }
  Eigen::Index point_count() const { return static_cast<Eigen::Index>(coords_.size()) / dim_; }

  /// Positively oriented finite simplices, one row of n+1 point indices each.
  IndexMatrix finite_simplices() const;

  /// Hull facets as (n+1)-tuples containing kInfiniteVertex. Replacing the
  /// infinite entry by a query point gives positive orientation exactly when
  /// the query lies strictly outside that facet.
  IndexMatrix hull_facets() const;

 private:
  const double* point(int i) const { return coords_.data() + static_cast<std::size_t>(i) * dim_; }
  int* verts(int s) { return verts_.data() + static_cast<std::size_t>(s) * (dim_ + 1); }
  const int* verts(int s) const { return verts_.data() + static_cast<std::size_t>(s) * (dim_ + 1); }
  int* nbrs(int s) { return nbrs_.data() + static_cast<std::size_t>(s) * (dim_ + 1); }
  bool is_ghost(int s) const;

  int new_simplex();
  void kill_simplex(int s);

  std::vector<int> initial_simplex() const;
  std::vector<int> insertion_order(const std::vector<int>& skip) const;
  void bootstrap(const std::vector<int>& seed);
  void insert(int p);

  int locate(int p);
  bool in_conflict(int s, int p) const;
  /// Orientation of simplex s with position `pos` replaced by point p.
  int orientation_with(int s, int pos, int p) const;

  void link_facets(const std::vector<int>& created);

  int dim_;
  std::vector<double> coords_;
  Predicates pred_;

  std::vector<int> verts_;
  std::vector<int> nbrs_;
  std::vector<char> alive_;
  std::vector<int> free_;
  int last_ = 0;
  std::uint64_t walk_state_ = 0x9E3779B97F4A7C15ull;

  std::vector<int> stamp_;
  std::vector<int> vertex_mark_;
  int epoch_ = 0;
};

}  // namespace kdde
