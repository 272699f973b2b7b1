#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "kdde/dictionary.hpp"
#include "kdde/types.hpp"

namespace kdde {

enum class FitMethod { DDE, EDMD };

std::string to_string(FitMethod method);
FitMethod parse_fit_method(const std::string& s);

/// Inner-product matrices R = <g_i, g_j> and Q = <g_i o f, g_j>.
struct GramPair {
  Matrix R;
  Matrix Q;
  double condition_estimate = 0.0;  // lambda_max / lambda_min of R, +inf when singular
  Eigen::Index node_count = 0;
  double hull_volume = 0.0;
};

/// Finite Koopman surrogate z_{t+1} = A z_t over a fixed dictionary.
struct KoopmanModel {
  Dictionary dictionary;
  Matrix A;
  FitMethod method = FitMethod::DDE;
  std::optional<GramPair> grams;
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const;
  static KoopmanModel from_json(const nlohmann::json& j);
};

void write_model(const KoopmanModel& model, const std::filesystem::path& path);
KoopmanModel read_model(const std::filesystem::path& path);

}  // namespace kdde
