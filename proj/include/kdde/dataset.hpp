#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kdde/types.hpp"

namespace kdde {

/// Paired samples (x_t, x_{t+1}); row i of `current` maps to row i of `next`.
struct TransitionDataset {
  Matrix current;  // N x n
  Matrix next;     // N x n
  nlohmann::json provenance = nlohmann::json::object();

  Eigen::Index size() const { return current.rows(); }
  int dim() const { return static_cast<int>(current.cols()); }

  /// Throws DimensionMismatch / NonFiniteInput / EmptyDataset.
  void validate() const;
};

/// CSV with header x1..xn,y1..yn, values written with 17 significant digits.
void write_dataset_csv(const TransitionDataset& data, const std::filesystem::path& path);
TransitionDataset read_dataset_csv(const std::filesystem::path& path);

/// `<csv path>.json` next to the dataset.
std::filesystem::path provenance_path(const std::filesystem::path& csv_path);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace kdde
