#include "kdde/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "kdde/error.hpp"

namespace kdde {

namespace {

constexpr int kUnlinked = -2;

struct FacetKeyHash {
  std::size_t operator()(const std::vector<int>& key) const noexcept {
    std::size_t h = 0xcbf29ce484222325ull;
    for (int v : key) {
      h ^= static_cast<std::size_t>(static_cast<unsigned>(v));
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Predicates

Predicates::Predicates(int dim, double relative_tolerance) : dim_(dim), tol_(relative_tolerance), sphere_sign_(1) {
  scratch_.resize(static_cast<std::size_t>((dim + 1) * (dim + 1)));
  // Calibrate the in-sphere determinant sign on the unit corner simplex,
  // which is positively oriented, with its centroid as the query.
  std::vector<double> ref(static_cast<std::size_t>((dim + 1) * dim), 0.0);
  for (int i = 1; i <= dim; ++i) ref[static_cast<std::size_t>(i * dim + i - 1)] = 1.0;
  std::vector<double> centroid(static_cast<std::size_t>(dim), 1.0 / (dim + 1));
  std::vector<long double> m(static_cast<std::size_t>((dim + 1) * (dim + 1)));
  for (int i = 0; i <= dim; ++i) {
    long double sq = 0;
    for (int d = 0; d < dim; ++d) {
      const long double diff = static_cast<long double>(ref[static_cast<std::size_t>(i * dim + d)]) - centroid[static_cast<std::size_t>(d)];
      m[static_cast<std::size_t>(i * (dim + 1) + d)] = diff;
      sq += diff * diff;
    }
    m[static_cast<std::size_t>(i * (dim + 1) + dim)] = sq;
  }
  sphere_sign_ = det(m, dim + 1) > 0 ? 1 : -1;
}

long double Predicates::det(std::vector<long double>& a, int size) const {
  long double result = 1;
  for (int c = 0; c < size; ++c) {
    int pivot = c;
    long double best = std::fabs(a[static_cast<std::size_t>(c * size + c)]);
    for (int r = c + 1; r < size; ++r) {
      const long double v = std::fabs(a[static_cast<std::size_t>(r * size + c)]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0) return 0;
    if (pivot != c) {
      for (int k = 0; k < size; ++k)
        std::swap(a[static_cast<std::size_t>(c * size + k)], a[static_cast<std::size_t>(pivot * size + k)]);
      result = -result;
    }
    const long double diag = a[static_cast<std::size_t>(c * size + c)];
    result *= diag;
    for (int r = c + 1; r < size; ++r) {
      const long double f = a[static_cast<std::size_t>(r * size + c)] / diag;
      if (f == 0) continue;
      for (int k = c + 1; k < size; ++k)
        a[static_cast<std::size_t>(r * size + k)] -= f * a[static_cast<std::size_t>(c * size + k)];
    }
  }
  return result;
}

int Predicates::orientation(const double* const* v) const {
  long double value;
  long double bound;
  if (dim_ == 2) {
    const long double ax = static_cast<long double>(v[1][0]) - v[0][0];
    const long double ay = static_cast<long double>(v[1][1]) - v[0][1];
    const long double bx = static_cast<long double>(v[2][0]) - v[0][0];
    const long double by = static_cast<long double>(v[2][1]) - v[0][1];
    value = ax * by - ay * bx;
    bound = std::sqrt((ax * ax + ay * ay) * (bx * bx + by * by));
  } else {
    auto& m = scratch_;
    bound = 1;
    for (int i = 0; i < dim_; ++i) {
      long double sq = 0;
      for (int d = 0; d < dim_; ++d) {
        const long double diff = static_cast<long double>(v[i + 1][d]) - v[0][d];
        m[static_cast<std::size_t>(i * dim_ + d)] = diff;
        sq += diff * diff;
      }
      bound *= std::sqrt(sq);
    }
    value = det(m, dim_);
  }
  if (std::fabs(value) <= tol_ * bound) return 0;
  return value > 0 ? 1 : -1;
}

int Predicates::in_sphere(const double* const* v, const double* q) const {
  long double value;
  long double bound = 1;
  if (dim_ == 2) {
    long double r[3][3];
    for (int i = 0; i < 3; ++i) {
      r[i][0] = static_cast<long double>(v[i][0]) - q[0];
      r[i][1] = static_cast<long double>(v[i][1]) - q[1];
      r[i][2] = r[i][0] * r[i][0] + r[i][1] * r[i][1];
      bound *= std::sqrt(r[i][2] + r[i][2] * r[i][2]);
    }
    value = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
            r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  } else {
    auto& m = scratch_;
    const int size = dim_ + 1;
    for (int i = 0; i <= dim_; ++i) {
      long double sq = 0;
      for (int d = 0; d < dim_; ++d) {
        const long double diff = static_cast<long double>(v[i][d]) - q[d];
        m[static_cast<std::size_t>(i * size + d)] = diff;
        sq += diff * diff;
      }
      m[static_cast<std::size_t>(i * size + dim_)] = sq;
      bound *= std::sqrt(sq + sq * sq);
    }
    value = det(m, size);
  }
  if (std::fabs(value) <= tol_ * bound) return 0;
  return (value > 0 ? 1 : -1) * sphere_sign_;
}

// ---------------------------------------------------------------------------
// Triangulation

DelaunayTriangulation::DelaunayTriangulation(const Matrix& points)
    : dim_(static_cast<int>(points.cols())), pred_(std::max(1, static_cast<int>(points.cols()))) {
  if (dim_ < 1) throw Error(ErrorCode::DimensionMismatch, "points must have at least one coordinate");
  if (points.rows() < dim_ + 1)
    throw Error(ErrorCode::TooFewPoints, std::to_string(points.rows()) + " points cannot span a " +
                                             std::to_string(dim_) + "-simplex");
  if (!points.allFinite()) throw Error(ErrorCode::NonFiniteInput, "mesh points contain NaN or Inf");

  coords_.resize(static_cast<std::size_t>(points.size()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int d = 0; d < dim_; ++d) coords_[static_cast<std::size_t>(i * dim_ + d)] = points(i, d);

  vertex_mark_.assign(static_cast<std::size_t>(points.rows()), 0);
  const auto seed = initial_simplex();
  bootstrap(seed);
  for (int p : insertion_order(seed)) insert(p);
}

bool DelaunayTriangulation::is_ghost(int s) const {
  const int* v = verts(s);
  return std::find(v, v + dim_ + 1, kInfiniteVertex) != v + dim_ + 1;
}

int DelaunayTriangulation::new_simplex() {
  int s;
  if (!free_.empty()) {
    s = free_.back();
    free_.pop_back();
    alive_[static_cast<std::size_t>(s)] = 1;
  } else {
    s = static_cast<int>(alive_.size());
    alive_.push_back(1);
    verts_.resize(verts_.size() + static_cast<std::size_t>(dim_ + 1));
    nbrs_.resize(nbrs_.size() + static_cast<std::size_t>(dim_ + 1));
    stamp_.push_back(0);
  }
  std::fill(nbrs(s), nbrs(s) + dim_ + 1, kUnlinked);
  return s;
}

void DelaunayTriangulation::kill_simplex(int s) {
  alive_[static_cast<std::size_t>(s)] = 0;
  free_.push_back(s);
}

std::vector<int> DelaunayTriangulation::initial_simplex() const {
  const int count = static_cast<int>(point_count());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> pts(coords_.data(), count, dim_);
  const double diag = (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
  const double tol = 1e-10 * diag;

  std::vector<int> chosen;
  int first = 0;
  for (int i = 1; i < count; ++i)
    if (pts(i, 0) < pts(first, 0)) first = i;
  chosen.push_back(first);

  std::vector<Eigen::VectorXd> basis;
  for (int k = 0; k < dim_; ++k) {
    int best = -1;
    double best_norm = tol;
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd r = (pts.row(i) - pts.row(first)).transpose();
      for (const auto& b : basis) r -= r.dot(b) * b;
      const double norm = r.norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = i;
      }
    }
    if (best < 0)
      throw Error(ErrorCode::DegenerateInput,
                  "points are affinely dependent (they span only " + std::to_string(k) + " of " +
                      std::to_string(dim_) + " dimensions)");
    Eigen::VectorXd r = (pts.row(best) - pts.row(first)).transpose();
    for (const auto& b : basis) r -= r.dot(b) * b;
    // Second Gram-Schmidt pass keeps the basis orthonormal to working precision.
    for (const auto& b : basis) r -= r.dot(b) * b;
    basis.push_back(r.normalized());
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<int> DelaunayTriangulation::insertion_order(const std::vector<int>& skip) const {
  const int count = static_cast<int>(point_count());
  std::vector<double> lo(static_cast<std::size_t>(dim_), HUGE_VAL), hi(static_cast<std::size_t>(dim_), -HUGE_VAL);
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < dim_; ++d) {
      lo[static_cast<std::size_t>(d)] = std::min(lo[static_cast<std::size_t>(d)], point(i)[d]);
      hi[static_cast<std::size_t>(d)] = std::max(hi[static_cast<std::size_t>(d)], point(i)[d]);
    }
  }
  const int bits = std::max(1, std::min(20, 62 / dim_));
  const double cells = static_cast<double>((1u << bits) - 1);

  std::vector<std::uint64_t> key(static_cast<std::size_t>(count), 0);
  for (int i = 0; i < count; ++i) {
    std::uint64_t k = 0;
    std::vector<std::uint32_t> q(static_cast<std::size_t>(dim_));
    for (int d = 0; d < dim_; ++d) {
      const double span = hi[static_cast<std::size_t>(d)] - lo[static_cast<std::size_t>(d)];
      const double t = span > 0 ? (point(i)[d] - lo[static_cast<std::size_t>(d)]) / span : 0.0;
      q[static_cast<std::size_t>(d)] = static_cast<std::uint32_t>(std::lround(t * cells));
    }
    for (int b = bits - 1; b >= 0; --b)
      for (int d = 0; d < dim_; ++d) k = (k << 1) | ((q[static_cast<std::size_t>(d)] >> b) & 1u);
    key[static_cast<std::size_t>(i)] = k;
  }

  std::vector<char> is_seed(static_cast<std::size_t>(count), 0);
  for (int s : skip) is_seed[static_cast<std::size_t>(s)] = 1;
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    if (!is_seed[static_cast<std::size_t>(i)]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });
  return order;
}

void DelaunayTriangulation::bootstrap(const std::vector<int>& seed) {
  const int n1 = dim_ + 1;
  std::vector<int> base = seed;
  {
    std::vector<const double*> v(static_cast<std::size_t>(n1));
    for (int k = 0; k < n1; ++k) v[static_cast<std::size_t>(k)] = point(base[static_cast<std::size_t>(k)]);
    if (pred_.orientation(v.data()) < 0) std::swap(base[0], base[1]);
  }

  std::vector<int> created;
  const int root = new_simplex();
  std::copy(base.begin(), base.end(), verts(root));
  created.push_back(root);

  for (int i = 0; i < n1; ++i) {
    const int g = new_simplex();
    std::vector<int> tuple = base;
    tuple[static_cast<std::size_t>(i)] = kInfiniteVertex;
    std::swap(tuple[static_cast<std::size_t>(i)], tuple[static_cast<std::size_t>(i == 0 ? 1 : 0)]);
    std::copy(tuple.begin(), tuple.end(), verts(g));
    created.push_back(g);
  }
  link_facets(created);
  last_ = root;
}

void DelaunayTriangulation::link_facets(const std::vector<int>& created) {
  std::unordered_map<std::vector<int>, std::pair<int, int>, FacetKeyHash> open;
  std::vector<int> key(static_cast<std::size_t>(dim_));
  for (int s : created) {
    for (int j = 0; j <= dim_; ++j) {
      if (nbrs(s)[j] != kUnlinked) continue;
      key.clear();
      for (int k = 0; k <= dim_; ++k)
        if (k != j) key.push_back(verts(s)[k]);
      std::sort(key.begin(), key.end());
      auto it = open.find(key);
      if (it == open.end()) {
        open.emplace(key, std::make_pair(s, j));
      } else {
        const auto [t, tj] = it->second;
        nbrs(s)[j] = t;
        nbrs(t)[tj] = s;
        open.erase(it);
      }
    }
  }
  if (!open.empty()) throw Error(ErrorCode::DegenerateInput, "triangulation left unmatched facets");
}

int DelaunayTriangulation::orientation_with(int s, int pos, int p) const {
  const int* v = verts(s);
  const double* ptrs[64];
  std::vector<const double*> heap;
  const double** arr = ptrs;
  if (dim_ + 1 > 64) {
    heap.resize(static_cast<std::size_t>(dim_ + 1));
    arr = heap.data();
  }
  for (int k = 0; k <= dim_; ++k) arr[k] = k == pos ? point(p) : point(v[k]);
  return pred_.orientation(arr);
}

bool DelaunayTriangulation::in_conflict(int s, int p) const {
  const int* v = verts(s);
  for (int k = 0; k <= dim_; ++k)
    if (v[k] == kInfiniteVertex) return orientation_with(s, k, p) > 0;
  const double* ptrs[64];
  std::vector<const double*> heap;
  const double** arr = ptrs;
  if (dim_ + 1 > 64) {
    heap.resize(static_cast<std::size_t>(dim_ + 1));
    arr = heap.data();
  }
  for (int k = 0; k <= dim_; ++k) arr[k] = point(v[k]);
  return pred_.in_sphere(arr, point(p)) > 0;
}

int DelaunayTriangulation::locate(int p) {
  int s = last_;
  if (!alive_[static_cast<std::size_t>(s)] || is_ghost(s)) {
    for (s = 0; s < static_cast<int>(alive_.size()); ++s)
      if (alive_[static_cast<std::size_t>(s)] && !is_ghost(s)) break;
  }
  const std::size_t limit = 4 * alive_.size() + 64;
  for (std::size_t step = 0; step < limit; ++step) {
    if (is_ghost(s)) return s;
    walk_state_ = walk_state_ * 6364136223846793005ull + 1442695040888963407ull;
    const int offset = static_cast<int>((walk_state_ >> 33) % static_cast<std::uint64_t>(dim_ + 1));
    bool moved = false;
    for (int k = 0; k <= dim_; ++k) {
      const int i = (offset + k) % (dim_ + 1);
      if (orientation_with(s, i, p) < 0) {
        s = nbrs(s)[i];
        moved = true;
        break;
      }
    }
    if (!moved) return s;
  }
  // The walk cannot cycle on a Delaunay mesh; fall back to a scan if
  // tolerance effects ever make it wander.
  for (int t = 0; t < static_cast<int>(alive_.size()); ++t) {
    if (!alive_[static_cast<std::size_t>(t)]) continue;
    if (is_ghost(t)) {
      if (in_conflict(t, p)) return t;
      continue;
    }
    bool inside = true;
    for (int i = 0; i <= dim_ && inside; ++i) inside = orientation_with(t, i, p) >= 0;
    if (inside) return t;
  }
  throw Error(ErrorCode::DegenerateInput, "point location failed");
}

void DelaunayTriangulation::insert(int p) {
  const int seed = locate(p);
  ++epoch_;
  const int in_cavity = 2 * epoch_;
  const int rejected = 2 * epoch_ + 1;
  // stamp_ values from earlier epochs are always smaller, so no reset needed.
  auto stamp = [&](int s) -> int& { return stamp_[static_cast<std::size_t>(s)]; };

  std::vector<int> cavity{seed};
  stamp(seed) = in_cavity;
  for (std::size_t head = 0; head < cavity.size(); ++head) {
    const int s = cavity[head];
    for (int i = 0; i <= dim_; ++i) {
      const int t = nbrs(s)[i];
      if (stamp(t) == in_cavity || stamp(t) == rejected) continue;
      if (in_conflict(t, p)) {
        stamp(t) = in_cavity;
        cavity.push_back(t);
      } else {
        stamp(t) = rejected;
      }
    }
  }

  // Every new finite simplex must be strictly positively oriented; absorb
  // the outside neighbor of any boundary facet that p does not see.
  std::vector<std::pair<int, int>> boundary;
  for (bool grown = true; grown;) {
    grown = false;
    boundary.clear();
    for (std::size_t c = 0; c < cavity.size() && !grown; ++c) {
      const int s = cavity[c];
      const int* v = verts(s);
      for (int i = 0; i <= dim_; ++i) {
        const int t = nbrs(s)[i];
        if (stamp(t) == in_cavity) continue;
        bool finite_result = true;
        for (int k = 0; k <= dim_; ++k)
          if (k != i && v[k] == kInfiniteVertex) finite_result = false;
        if (finite_result && orientation_with(s, i, p) <= 0) {
          stamp(t) = in_cavity;
          cavity.push_back(t);
          grown = true;
          break;
        }
        boundary.emplace_back(s, i);
      }
    }
  }

  {
    // A vertex whose whole star fell into the cavity would vanish from the mesh.
    ++epoch_;
    const int seen = 2 * epoch_;
    auto mark = [&](int v) -> int& { return vertex_mark_[static_cast<std::size_t>(v)]; };
    for (const auto& [s, i] : boundary)
      for (int k = 0; k <= dim_; ++k)
        if (k != i && verts(s)[k] != kInfiniteVertex) mark(verts(s)[k]) = seen;
    for (int s : cavity)
      for (int k = 0; k <= dim_; ++k) {
        const int v = verts(s)[k];
        if (v != kInfiniteVertex && mark(v) != seen)
          throw Error(ErrorCode::DegenerateInput, "cavity swallowed vertex " + std::to_string(v) +
                                                      " while inserting point " + std::to_string(p));
      }
  }

  std::vector<int> created;
  created.reserve(boundary.size());
  for (const auto& [s, i] : boundary) {
    const int t = new_simplex();
    std::copy(verts(s), verts(s) + dim_ + 1, verts(t));
    verts(t)[i] = p;
    const int outside = nbrs(s)[i];
    nbrs(t)[i] = outside;
    int* back = nbrs(outside);
    for (int k = 0; k <= dim_; ++k)
      if (back[k] == s) back[k] = t;
    stamp(t) = 0;
    created.push_back(t);
  }
  link_facets(created);
  for (int s : cavity) kill_simplex(s);

  last_ = created.front();
  for (int t : created)
    if (!is_ghost(t)) {
      last_ = t;
      break;
    }
}

IndexMatrix DelaunayTriangulation::finite_simplices() const {
  std::vector<int> ids;
  for (int s = 0; s < static_cast<int>(alive_.size()); ++s)
    if (alive_[static_cast<std::size_t>(s)] && !is_ghost(s)) ids.push_back(s);
  IndexMatrix out(static_cast<Eigen::Index>(ids.size()), dim_ + 1);
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (int k = 0; k <= dim_; ++k) out(static_cast<Eigen::Index>(r), k) = verts(ids[r])[k];
  return out;
}

IndexMatrix DelaunayTriangulation::hull_facets() const {
  std::vector<int> ids;
  for (int s = 0; s < static_cast<int>(alive_.size()); ++s)
    if (alive_[static_cast<std::size_t>(s)] && is_ghost(s)) ids.push_back(s);
  IndexMatrix out(static_cast<Eigen::Index>(ids.size()), dim_ + 1);
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (int k = 0; k <= dim_; ++k) out(static_cast<Eigen::Index>(r), k) = verts(ids[r])[k];
  return out;
}

}  // namespace kdde
