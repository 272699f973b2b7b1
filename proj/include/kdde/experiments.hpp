#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdde/dataset.hpp"
#include "kdde/dictionary.hpp"
#include "kdde/dynamics.hpp"
#include "kdde/eval.hpp"
#include "kdde/model.hpp"

namespace kdde {

/// Textual dictionary recipe: "state", "rbf:5x5", "rbf:5x5:1.5" (width
/// factor) or "mlp:weights.json".
struct DictionarySpec {
  enum class Kind { State, Rbf, Mlp };
  Kind kind = Kind::Rbf;
  std::vector<int> grid{5, 5};
  double width_factor = 1.0;
  std::string mlp_path;

  static DictionarySpec parse(const std::string& text);
  std::string str() const;

  /// RBF centers span the min/max of the dataset's current states.
  Dictionary build(const TransitionDataset& data) const;
};

struct FitSettings {
  double ridge = 0.0;
  double rcond = 1e-12;
};

KoopmanModel fit(FitMethod method, const TransitionDataset& data, const Dictionary& dict, const FitSettings& settings);

/// Box for uniform and Gaussian datasets, hull-masked bounding box for
/// trajectory datasets.
EvalDomain default_domain(DatasetKind kind, const DatasetSpec& spec, const TransitionDataset& data);

struct Comparison {
  EvalReport edmd;
  EvalReport dde;
};

/// Fits both methods on `data` and evaluates them on the same grid.
Comparison compare_methods(const TransitionDataset& data, const Dictionary& dict, const PendulumParams& truth,
                           const EvalDomain& domain, std::span<const int> resolution, const FitSettings& settings);

struct ExperimentOptions {
  DictionarySpec dictionary;
  PendulumParams params;
  std::vector<int> resolution{100, 100};
  FitSettings fit;
  std::uint64_t seed = 7;
  int jobs = 1;
};

struct MethodStats {
  std::vector<double> totals;
  std::vector<double> variances;
  double mean_total = 0.0;
  double std_total = 0.0;  // spread across repeats (population)
  double mean_variance = 0.0;
};

struct ProtocolRow {
  Eigen::Index size = 0;
  MethodStats edmd;
  MethodStats dde;
};

/// Gaussian datasets at every size, `repeats` seeds each, averaged.
/// Repeat r of every size uses seed options.seed + r.
std::vector<ProtocolRow> gaussian_protocol(const Eigen::Vector2d& center, const std::vector<Eigen::Index>& sizes,
                                           int repeats, const ExperimentOptions& options);

/// Single-seed comparisons for a dataset kind at several sizes.
std::vector<ProtocolRow> size_sweep(DatasetKind kind, const std::vector<Eigen::Index>& sizes,
                                    const ExperimentOptions& options);

/// State entry Q[0,0] plus the RBF diagonal entries whose centers are
/// nearest, median and farthest from the origin (in box-normalized units).
std::vector<ConvergenceSelector> default_selectors(const Dictionary& dict);

/// Trajectory datasets of increasing size share the seed (so smaller sets
/// are prefixes of larger ones) and one dictionary, built on the largest.
ConvergenceTrace q_convergence(const std::vector<Eigen::Index>& sizes, const DatasetSpec& spec_template,
                               const ExperimentOptions& options,
                               std::optional<std::vector<ConvergenceSelector>> selectors = std::nullopt);

/// Same with a fixed, caller-supplied dictionary.
ConvergenceTrace q_convergence(const std::vector<Eigen::Index>& sizes, const DatasetSpec& spec_template,
                               const Dictionary& dict, const std::vector<ConvergenceSelector>& selectors,
                               const ExperimentOptions& options);

struct ObservableRow {
  int observables = 0;
  double edmd_total = 0.0;
  double dde_total = 0.0;
};

/// Trajectory dataset of `size` points, one comparison per RBF grid side.
std::vector<ObservableRow> observable_sweep(Eigen::Index size, const std::vector<int>& grid_sides,
                                            const ExperimentOptions& options);

/// Markdown results tables with "EDMD / DDE" cells; `table` is "I", "II" or "III".
std::string reproduce_table(const std::string& table, const ExperimentOptions& options, int repeats = 8);

/// Whole-experiment recipe; unknown keys are rejected.
struct ExperimentConfig {
  DatasetSpec dataset;
  std::string dictionary = "rbf:5x5";
  std::vector<std::string> methods{"dde", "edmd"};
  double ridge = 0.0;
  double rcond = 1e-12;
  std::vector<int> eval_grid{100, 100};
  std::string output_dir = "out";
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

}  // namespace kdde
