#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kdde/dataset.hpp"
#include "kdde/types.hpp"

namespace kdde {

/// Pendulum with quadratic damping that bounces off compliant walls:
///   theta'' = -sin(theta) + F_wall + F_damp
///   F_wall  = -sign(theta) k (|theta| - wall_angle)^2   when |theta| >= wall_angle
///   F_damp  = -sign(theta') c theta'^2
struct PendulumParams {
  double wall_stiffness = 200.0;
  double damping = 1.0;
  double wall_angle = std::numbers::pi / 4.0;
  double dt = 0.2;    // duration of one map application
  int substeps = 20;  // RK4 steps per map application

  void validate() const;
  nlohmann::json to_json() const;
  static PendulumParams from_json(const nlohmann::json& j);
};

/// Angular acceleration at (theta, theta').
double pendulum_acceleration(const PendulumParams& params, double theta, double theta_dot);

/// One application of the discrete-time map x -> f(x): `substeps` RK4 steps
/// covering dt.
Eigen::Vector2d pendulum_step(const PendulumParams& params, const Eigen::Vector2d& x);

/// Applies pendulum_step to every row of an N x 2 matrix.
Matrix pendulum_step_rows(const PendulumParams& params, const Matrix& states);

enum class DatasetKind { UniformGrid, GaussianCloud, Trajectories };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::UniformGrid;
  Eigen::Index size = 900;
  Box bounds{Eigen::Vector2d(-0.8, -2.0), Eigen::Vector2d(0.8, 2.0)};
  Eigen::Vector2d center{0.0, 0.0};
  /// Per-axis standard deviation; a negative entry means extent / 4.
  Eigen::Vector2d stddev{-1.0, -1.0};
  int border_count = 100;
  int n_trajectories = 100;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::Vector2d effective_stddev() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

/// Uniform grid: floor(sqrt(N))^2 points on an evenly divided grid including
/// the box edges. Gaussian cloud: N - border_count truncated-normal samples
/// (redrawn until inside the box) plus border_count points spread along the
/// box perimeter with the corners included. Trajectories: n_trajectories
/// initial states drawn uniformly in the box, each rolled N / n_trajectories
/// steps. Every sample is paired with its image under pendulum_step.
/// The provenance records spec, params and any size adjustments.
TransitionDataset generate(const DatasetSpec& spec, const PendulumParams& params = {});

/// border_count points on the perimeter of a 2D box, corners first on each side.
Matrix perimeter_points(const Box& bounds, int count);

}  // namespace kdde
