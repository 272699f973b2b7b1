#pragma once

#include <Eigen/Core>

namespace kdde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }
  Vector extent() const { return hi - lo; }
  double volume() const { return extent().prod(); }
  bool contains(const Eigen::Ref<const Vector>& x, double tol = 0.0) const {
    return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
  }
};

/// Bounding box of the rows of `points`.
inline Box bounding_box(const Matrix& points) {
  return Box{points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

}  // namespace kdde
