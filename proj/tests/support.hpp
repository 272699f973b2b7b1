#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "kdde/error.hpp"
#include "kdde/types.hpp"

namespace kdde::testing {

inline Matrix random_points(Eigen::Index count, int dim, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix p(count, dim);
  for (Eigen::Index i = 0; i < count; ++i)
    for (int d = 0; d < dim; ++d) p(i, d) = u(rng);
  return p;
}

// k x k lattice including the box edges, row-major.
inline Matrix grid_points(int kx, int ky, double x0, double x1, double y0, double y1) {
  Matrix p(static_cast<Eigen::Index>(kx) * ky, 2);
  Eigen::Index r = 0;
  for (int i = 0; i < kx; ++i)
    for (int j = 0; j < ky; ++j) {
      p(r, 0) = kx == 1 ? x0 : x0 + (x1 - x0) * i / (kx - 1);
      p(r, 1) = ky == 1 ? y0 : y0 + (y1 - y0) * j / (ky - 1);
      ++r;
    }
  return p;
}

// Code of the kdde::Error thrown by f, or nothing when f returns normally.
template <class F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace kdde::testing
