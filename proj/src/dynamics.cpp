#include "kdde/dynamics.hpp"

#include <cmath>
#include <random>

#include "kdde/error.hpp"

namespace kdde {

using nlohmann::json;

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

Eigen::Vector2d rhs(const PendulumParams& p, const Eigen::Vector2d& x) {
  return {x(1), pendulum_acceleration(p, x(0), x(1))};
}

json vec2_json(const Eigen::Vector2d& v) { return json::array({v(0), v(1)}); }

Eigen::Vector2d vec2_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::SchemaError, std::string(what) + " must be a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void PendulumParams::validate() const {
  if (!(wall_stiffness > 0.0)) throw Error(ErrorCode::SpecError, "wall stiffness must be positive");
  if (!(damping >= 0.0)) throw Error(ErrorCode::SpecError, "damping must be nonnegative");
  if (!(wall_angle > 0.0)) throw Error(ErrorCode::SpecError, "wall angle must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::SpecError, "dt must be positive");
  if (substeps < 1) throw Error(ErrorCode::SpecError, "substeps must be >= 1");
}

json PendulumParams::to_json() const {
  return {{"wall_stiffness", wall_stiffness}, {"damping", damping}, {"wall_angle", wall_angle},
          {"dt", dt}, {"substeps", substeps}, {"integrator", "rk4"}};
}

PendulumParams PendulumParams::from_json(const json& j) {
  PendulumParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "wall_stiffness") p.wall_stiffness = value.get<double>();
    else if (key == "damping") p.damping = value.get<double>();
    else if (key == "wall_angle") p.wall_angle = value.get<double>();
    else if (key == "dt") p.dt = value.get<double>();
    else if (key == "substeps") p.substeps = value.get<int>();
    else if (key == "integrator") {
      if (value != "rk4") throw Error(ErrorCode::SchemaError, "only the rk4 integrator is supported");
    } else throw Error(ErrorCode::SchemaError, "unknown pendulum parameter '" + key + "'");
  }
  p.validate();
  return p;
}

double pendulum_acceleration(const PendulumParams& p, double theta, double theta_dot) {
  const double excess = std::abs(theta) - p.wall_angle;
  const double wall = excess >= 0.0 ? -sign(theta) * p.wall_stiffness * excess * excess : 0.0;
  const double damp = -sign(theta_dot) * p.damping * theta_dot * theta_dot;
  return -std::sin(theta) + wall + damp;
}

Eigen::Vector2d pendulum_step(const PendulumParams& p, const Eigen::Vector2d& x0) {
  const double h = p.dt / p.substeps;
  Eigen::Vector2d x = x0;
  for (int s = 0; s < p.substeps; ++s) {
    const Eigen::Vector2d k1 = rhs(p, x);
    const Eigen::Vector2d k2 = rhs(p, x + 0.5 * h * k1);
    const Eigen::Vector2d k3 = rhs(p, x + 0.5 * h * k2);
    const Eigen::Vector2d k4 = rhs(p, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

Matrix pendulum_step_rows(const PendulumParams& params, const Matrix& states) {
  if (states.cols() != 2) throw Error(ErrorCode::DimensionMismatch, "pendulum states have two components");
  Matrix out(states.rows(), 2);
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    out.row(i) = pendulum_step(params, states.row(i).transpose()).transpose();
  return out;
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::UniformGrid: return "uniform";
    case DatasetKind::GaussianCloud: return "gaussian";
    case DatasetKind::Trajectories: return "traj";
  }
  return "uniform";
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "uniform") return DatasetKind::UniformGrid;
  if (s == "gaussian") return DatasetKind::GaussianCloud;
  if (s == "traj" || s == "trajectories") return DatasetKind::Trajectories;
  throw Error(ErrorCode::SpecError, "unknown dataset kind '" + s + "' (expected uniform, gaussian or traj)");
}

Eigen::Vector2d DatasetSpec::effective_stddev() const {
  const Eigen::Vector2d quarter = bounds.extent() / 4.0;
  return {stddev(0) < 0 ? quarter(0) : stddev(0), stddev(1) < 0 ? quarter(1) : stddev(1)};
}

void DatasetSpec::validate() const {
  if (bounds.dim() != 2 || bounds.hi.size() != 2) throw Error(ErrorCode::SpecError, "pendulum bounds are 2D");
  if (!((bounds.extent().array() > 0.0).all())) throw Error(ErrorCode::DegenerateBounds, "bounds have a zero-length side");
  switch (kind) {
    case DatasetKind::UniformGrid:
      if (size < 4) throw Error(ErrorCode::SpecError, "a uniform grid needs at least 4 points");
      break;
    case DatasetKind::GaussianCloud:
      if (border_count < 0 || size < border_count)
        throw Error(ErrorCode::SpecError, "gaussian dataset size " + std::to_string(size) +
                                              " is smaller than its border count " + std::to_string(border_count));
      if (!bounds.contains(center, 1e-12)) throw Error(ErrorCode::SpecError, "gaussian center lies outside the bounds");
      if (!(effective_stddev().array() > 0.0).all()) throw Error(ErrorCode::SpecError, "gaussian stddev must be positive");
      break;
    case DatasetKind::Trajectories:
      if (n_trajectories < 1) throw Error(ErrorCode::SpecError, "need at least one trajectory");
      if (size < n_trajectories)
        throw Error(ErrorCode::SpecError, "trajectory dataset size must be at least the trajectory count");
      break;
  }
}

json DatasetSpec::to_json() const {
  return {{"kind", to_string(kind)},
          {"size", size},
          {"bounds", {{"lo", vec2_json(bounds.lo)}, {"hi", vec2_json(bounds.hi)}}},
          {"center", vec2_json(center)},
          {"stddev", vec2_json(effective_stddev())},
          {"border_count", border_count},
          {"n_trajectories", n_trajectories},
          {"seed", seed}};
}

DatasetSpec DatasetSpec::from_json(const json& j) {
  DatasetSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") s.kind = parse_dataset_kind(value.get<std::string>());
    else if (key == "size") s.size = value.get<Eigen::Index>();
    else if (key == "bounds") {
      s.bounds.lo = vec2_from(value.at("lo"), "bounds.lo");
      s.bounds.hi = vec2_from(value.at("hi"), "bounds.hi");
    } else if (key == "center") s.center = vec2_from(value, "center");
    else if (key == "stddev") s.stddev = vec2_from(value, "stddev");
    else if (key == "border_count") s.border_count = value.get<int>();
    else if (key == "n_trajectories") s.n_trajectories = value.get<int>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else throw Error(ErrorCode::SchemaError, "unknown dataset key '" + key + "'");
  }
  s.validate();
  return s;
}

Matrix perimeter_points(const Box& bounds, int count) {
  Matrix pts(count, 2);
  if (count == 0) return pts;
  const Eigen::Vector2d lo = bounds.lo, hi = bounds.hi;
  const Eigen::Vector2d corners[4] = {{lo(0), lo(1)}, {hi(0), lo(1)}, {hi(0), hi(1)}, {lo(0), hi(1)}};
  double lengths[4];
  double total = 0.0;
  for (int s = 0; s < 4; ++s) {
    lengths[s] = (corners[(s + 1) % 4] - corners[s]).norm();
    total += lengths[s];
  }
  // Largest-remainder split of the budget by side length, at least one
  // point (the starting corner) per side when the budget allows.
  int per_side[4];
  double remainder[4];
  int assigned = 0;
  for (int s = 0; s < 4; ++s) {
    const double share = count * lengths[s] / total;
    per_side[s] = static_cast<int>(std::floor(share));
    remainder[s] = share - per_side[s];
    assigned += per_side[s];
  }
  while (assigned < count) {
    int best = 0;
    for (int s = 1; s < 4; ++s)
      if (remainder[s] > remainder[best]) best = s;
    ++per_side[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  if (count >= 4) {
    for (int s = 0; s < 4; ++s) {
      if (per_side[s] > 0) continue;
      int donor = 0;
      for (int t = 1; t < 4; ++t)
        if (per_side[t] > per_side[donor]) donor = t;
      --per_side[donor];
      ++per_side[s];
    }
  }
  Eigen::Index row = 0;
  for (int s = 0; s < 4; ++s) {
    const Eigen::Vector2d a = corners[s], b = corners[(s + 1) % 4];
    for (int j = 0; j < per_side[s]; ++j) {
      const double t = static_cast<double>(j) / per_side[s];
      pts.row(row++) = (a + t * (b - a)).transpose();
    }
  }
  return pts;
}

TransitionDataset generate(const DatasetSpec& spec, const PendulumParams& params) {
  spec.validate();
  params.validate();
  std::mt19937_64 rng(spec.seed);
  const Box& box = spec.bounds;
  json notes = json::array();

  TransitionDataset data;
  switch (spec.kind) {
    case DatasetKind::UniformGrid: {
      const auto side = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(spec.size)) + 1e-9));
      if (side * side != spec.size)
        notes.push_back("requested " + std::to_string(spec.size) + " points; grid rounded down to " +
                        std::to_string(side) + "x" + std::to_string(side));
      const Vector a = Vector::LinSpaced(side, box.lo(0), box.hi(0));
      const Vector b = Vector::LinSpaced(side, box.lo(1), box.hi(1));
      data.current.resize(side * side, 2);
      for (Eigen::Index i = 0; i < side; ++i)
        for (Eigen::Index j = 0; j < side; ++j) data.current.row(i * side + j) << a(i), b(j);
      data.next = pendulum_step_rows(params, data.current);
      break;
    }
    case DatasetKind::GaussianCloud: {
      const Eigen::Vector2d sd = spec.effective_stddev();
      std::normal_distribution<double> n0(spec.center(0), sd(0)), n1(spec.center(1), sd(1));
      const Eigen::Index interior = spec.size - spec.border_count;
      data.current.resize(spec.size, 2);
      for (Eigen::Index i = 0; i < interior; ++i) {
        Eigen::Vector2d x;
        do {
          x << n0(rng), n1(rng);
        } while (!box.contains(x));
        data.current.row(i) = x.transpose();
      }
      data.current.bottomRows(spec.border_count) = perimeter_points(box, spec.border_count);
      data.next = pendulum_step_rows(params, data.current);
      break;
    }
    case DatasetKind::Trajectories: {
      const Eigen::Index steps = spec.size / spec.n_trajectories;
      if (steps * spec.n_trajectories != spec.size)
        notes.push_back("requested " + std::to_string(spec.size) + " samples; using " +
                        std::to_string(spec.n_trajectories) + " trajectories x " + std::to_string(steps) + " steps");
      std::uniform_real_distribution<double> u0(box.lo(0), box.hi(0)), u1(box.lo(1), box.hi(1));
      std::vector<Eigen::Vector2d> starts(static_cast<std::size_t>(spec.n_trajectories));
      for (auto& x : starts) {
        const double theta = u0(rng);
        x << theta, u1(rng);
      }
      const Eigen::Index total = steps * spec.n_trajectories;
      data.current.resize(total, 2);
      data.next.resize(total, 2);
      Eigen::Index row = 0;
      for (const auto& start : starts) {
        Eigen::Vector2d x = start;
        for (Eigen::Index s = 0; s < steps; ++s) {
          const Eigen::Vector2d y = pendulum_step(params, x);
          data.current.row(row) = x.transpose();
          data.next.row(row) = y.transpose();
          ++row;
          x = y;
        }
      }
      break;
    }
  }

  data.provenance = {{"generator", "pendulum"},
                     {"spec", spec.to_json()},
                     {"params", params.to_json()},
                     {"seed", spec.seed},
                     {"dt", params.dt},
                     {"samples", data.size()},
                     {"notes", notes}};
  return data;
}

}  // namespace kdde
