// End-to-end checks of the method's headline properties. One line per
// check; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "kdde/edmd.hpp"
#include "kdde/encoder.hpp"
#include "kdde/experiments.hpp"
#include "kdde/log.hpp"
#include "kdde/mesh.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kdde;
using kdde::testing::grid_points;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

int failures = 0;

void report(const std::string& name, const std::function<bool(std::ostringstream&)>& check) {
  std::ostringstream detail;
  detail.precision(4);
  bool ok = false;
  const auto t0 = Clock::now();
  try {
    ok = check(detail);
  } catch (const std::exception& e) {
    detail << "threw: " << e.what();
  }
  if (!ok) ++failures;
  std::printf("%s  %-28s %s (%.1fs)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.str().c_str(), seconds_since(t0));
  std::fflush(stdout);
}

bool quadrature(std::ostringstream& out) {
  const double exact = 7.0 / 6.0;
  const std::pair<int, double> cases[] = {{10, 0.05}, {32, 0.01}, {100, 0.005}};
  const auto t0 = Clock::now();
  bool ok = true;
  for (const auto& [side, limit] : cases) {
    const SimplicialMesh m = build_mesh(grid_points(side, side, 0, 1, 0, 1));
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m.node_count(); ++k) {
      const double x1 = m.nodes(k, 0), x2 = m.nodes(k, 1);
      sum += m.node_volumes(k) * (x1 * x1 * x2 + 1.0);
    }
    const double err = relative(sum, exact);
    out << "N=" << side * side << " err=" << err << " (<" << limit << ") ";
    ok = ok && err < limit;
  }
  const double t = seconds_since(t0);
  out << "time=" << t << "s";
  return ok && t < 10.0;
}

bool linear_exactness(std::ostringstream& out) {
  Eigen::Matrix2d L;
  L << 0.9, 0.0, 0.0, 0.8;
  const Matrix pts = grid_points(50, 50, -1, 1, -1, 1);
  const TransitionDataset data{pts, pts * L.transpose(), {}};
  const Dictionary d = Dictionary::state_only(2);
  const Matrix a_dde = fit_dde(data, d).A;
  const Matrix a_edmd = fit_edmd(data, d).A;
  const double e1 = (a_dde - L).cwiseAbs().maxCoeff();
  const double e2 = (a_edmd - L).cwiseAbs().maxCoeff();
  const double gap = (a_dde - a_edmd).cwiseAbs().maxCoeff();
  out << "dde=" << e1 << " edmd=" << e2 << " (<1e-3) agreement=" << gap << " (<1e-8)";
  return e1 < 1e-3 && e2 < 1e-3 && gap < 1e-8;
}

bool uniform_parity(std::ostringstream& out, const ExperimentOptions& opts) {
  int dde_wins = 0;
  bool ok = true;
  for (Eigen::Index n : {900, 2500, 10000, 22500}) {
    const auto t0 = Clock::now();
    const ProtocolRow r = size_sweep(DatasetKind::UniformGrid, {n}, opts).front();
    const double t = seconds_since(t0);
    const double gap = std::abs(r.dde.mean_total - r.edmd.mean_total) / r.edmd.mean_total;
    dde_wins += r.dde.mean_total <= r.edmd.mean_total;
    out << n << ":" << r.edmd.mean_total << "/" << r.dde.mean_total << " ";
    ok = ok && gap < 0.15 && t < 120.0;
  }
  out << "dde<=edmd " << dde_wins << "/4";
  return ok && dde_wins >= 3;
}

bool gaussian_robustness(std::ostringstream& out, const ExperimentOptions& opts, std::vector<ProtocolRow>& top) {
  bool ok = true;
  const Eigen::Vector2d centers[] = {{0.0, 0.0}, {0.8, 0.0}, {0.0, 2.0}};
  double gap_small = 0.0, gap_large = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto rows = gaussian_protocol(centers[c], {1000, 25000}, 8, opts);
    out << "[" << centers[c](0) << "," << centers[c](1) << "] ";
    for (const auto& r : rows) {
      out << r.edmd.mean_total << "/" << r.dde.mean_total << " ";
      if (c > 0) ok = ok && r.dde.mean_total < r.edmd.mean_total;
    }
    if (c == 1) {
      gap_small = rows[0].edmd.mean_total - rows[0].dde.mean_total;
      gap_large = rows[1].edmd.mean_total - rows[1].dde.mean_total;
    }
    if (c == 2) top = rows;
  }
  out << "gap[0.8,0] " << gap_small << "->" << gap_large;
  return ok && gap_large > gap_small;
}

bool error_spread(std::ostringstream& out, const ExperimentOptions& opts, const std::vector<ProtocolRow>& top) {
  const ProtocolRow& g = top.back();
  bool ok = g.edmd.mean_variance > g.dde.mean_variance;
  out << "gauss[0,2] var " << g.edmd.mean_variance << "/" << g.dde.mean_variance << "; traj ";
  for (const auto& r : size_sweep(DatasetKind::Trajectories, {2500, 5000, 10000, 25000}, opts)) {
    out << r.size << ":" << r.edmd.mean_variance << "/" << r.dde.mean_variance << " ";
    ok = ok && r.dde.mean_variance < r.edmd.mean_variance;
  }
  return ok;
}

bool gram_convergence(std::ostringstream& out, const ExperimentOptions& opts) {
  DatasetSpec spec;
  spec.kind = DatasetKind::Trajectories;
  spec.seed = opts.seed;
  const ConvergenceTrace t = q_convergence({1000, 2500, 5000, 10000, 25000}, spec, opts);
  const Vector change = t.last_relative_change();
  for (std::size_t s = 0; s < t.selectors.size(); ++s)
    out << t.selectors[s].label << "=" << change(static_cast<Eigen::Index>(s)) << " ";
  out << "(<0.01)";
  return t.selectors.size() == 4 && (change.array() < 0.01).all();
}

bool observable_order(std::ostringstream& out, const ExperimentOptions& opts) {
  const auto rows = observable_sweep(5000, {5, 7, 9}, opts);
  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i].observables << ":" << rows[i].edmd_total << "/" << rows[i].dde_total << " ";
    ok = ok && rows[i].dde_total < rows[i].edmd_total;
    if (i > 0) ok = ok && rows[i].dde_total < rows[i - 1].dde_total;
  }
  return ok && rows.size() == 3;
}

bool mesh_invariants(std::ostringstream& out) {
  int bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(500 + trial));
    const Eigen::Index count = 20 + static_cast<Eigen::Index>(rng() % 500);
    Matrix pts = kdde::testing::random_points(count, 2, 9000 + static_cast<std::uint64_t>(trial), -2.0, 3.0);
    if (trial % 5 == 0) pts.col(0) *= 50.0;
    const SimplicialMesh m = build_mesh(pts);
    bool ok = relative(m.simplex_volumes.sum(), m.hull_volume) < 1e-9 &&
              relative(m.node_volumes.sum(), m.hull_volume) < 1e-9 &&
              relative(m.hull_volume, kdde::testing::hull_area_oracle(pts)) < 1e-9;

    const double tol = 1e-12 * (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
    for (Eigen::Index p = 0; p < m.simplex_count() && ok; ++p)
      for (Eigen::Index q = 0; q < m.node_count() && ok; ++q) {
        const int* tri = m.simplices.row(p).data();
        if (q == tri[0] || q == tri[1] || q == tri[2]) continue;
        ok = !kdde::testing::strictly_inside_circumcircle(m.nodes, tri, q, tol);
      }

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix shuffled(count, 2);
    for (Eigen::Index i = 0; i < count; ++i) shuffled.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    const SimplicialMesh s = build_mesh(shuffled);
    // Node volumes follow the samples through the permutation.
    for (Eigen::Index i = 0; i < count && ok; ++i) {
      const double a = m.node_volumes(m.node_of_sample[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
      const double b = s.node_volumes(s.node_of_sample[static_cast<std::size_t>(i)]);
      ok = std::abs(a - b) <= 1e-9 * m.hull_volume;
    }
    bad += !ok;
  }
  out << "50 clouds, " << bad << " violating";
  return bad == 0;
}

}  // namespace

int main() {
  set_warning_handler([](const std::string&) {});
  ExperimentOptions opts;
  std::vector<ProtocolRow> top_center;

  report("quadrature convergence", quadrature);
  report("linear exactness", linear_exactness);
  report("uniform parity", [&](auto& o) { return uniform_parity(o, opts); });
  report("gaussian robustness", [&](auto& o) { return gaussian_robustness(o, opts, top_center); });
  report("error distribution", [&](auto& o) { return !top_center.empty() && error_spread(o, opts, top_center); });
  report("gram convergence", [&](auto& o) { return gram_convergence(o, opts); });
  report("observable order", [&](auto& o) { return observable_order(o, opts); });
  report("mesh invariants", mesh_invariants);

  std::printf("%d failed\n", failures);
  return failures;
}
