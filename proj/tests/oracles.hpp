#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "kdde/types.hpp"

namespace kdde::testing {

// Andrew's monotone chain, then the shoelace formula on the hull polygon.
inline double hull_area_oracle(const Matrix& pts) {
  std::vector<std::pair<double, double>> p;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) p.emplace_back(pts(i, 0), pts(i, 1));
  std::sort(p.begin(), p.end());
  auto cross = [](auto o, auto a, auto b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  double a = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& u = h[i];
    const auto& v = h[(i + 1) % h.size()];
    a += u.first * v.second - v.first * u.second;
  }
  return 0.5 * std::abs(a);
}

// Plain double circumcircle test, independent of the library predicates.
inline bool strictly_inside_circumcircle(const Matrix& nodes, const int* tri, Eigen::Index q, double tol) {
  const double ax = nodes(tri[0], 0), ay = nodes(tri[0], 1);
  const double bx = nodes(tri[1], 0), by = nodes(tri[1], 1);
  const double cx = nodes(tri[2], 0), cy = nodes(tri[2], 1);
  const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d;
  const double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d;
  const double r = std::hypot(ax - ux, ay - uy);
  return std::hypot(nodes(q, 0) - ux, nodes(q, 1) - uy) < r - tol;
}

}  // namespace kdde::testing
