#include "kdde/model.hpp"

#include "kdde/dataset.hpp"
#include "kdde/error.hpp"

namespace kdde {

using nlohmann::json;

std::string to_string(FitMethod method) { return method == FitMethod::DDE ? "dde" : "edmd"; }

FitMethod parse_fit_method(const std::string& s) {
  if (s == "dde") return FitMethod::DDE;
  if (s == "edmd") return FitMethod::EDMD;
  throw Error(ErrorCode::SchemaError, "unknown method '" + s + "' (expected dde or edmd)");
}

namespace {

json rows_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix square_from_json(const json& rows, Eigen::Index m, const char* what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != m)
    throw Error(ErrorCode::SchemaError, std::string(what) + " must have " + std::to_string(m) + " rows");
  Matrix out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m)
      throw Error(ErrorCode::SchemaError, std::string(what) + " must be square");
    for (Eigen::Index k = 0; k < m; ++k) out(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return out;
}

}  // namespace

json KoopmanModel::to_json() const {
  json j;
  j["method"] = kdde::to_string(method);
  j["dict"] = dictionary.to_json();
  j["A"] = rows_to_json(A);
  j["meta"] = meta;
  if (grams) {
    j["grams"] = {{"R", rows_to_json(grams->R)},
                  {"Q", rows_to_json(grams->Q)},
                  {"condition_estimate", grams->condition_estimate},
                  {"node_count", grams->node_count},
                  {"hull_volume", grams->hull_volume}};
  }
  return j;
}

KoopmanModel KoopmanModel::from_json(const json& j) {
  if (!j.is_object() || !j.contains("method") || !j.contains("dict") || !j.contains("A"))
    throw Error(ErrorCode::SchemaError, "model file needs 'method', 'dict' and 'A'");
  KoopmanModel model{Dictionary::from_json(j["dict"]), Matrix(), parse_fit_method(j["method"].get<std::string>()),
                     std::nullopt, j.value("meta", json::object())};
  const Eigen::Index m = model.dictionary.output_dim();
  model.A = square_from_json(j["A"], m, "A");
  if (j.contains("grams")) {
    const auto& g = j["grams"];
    GramPair grams;
    grams.R = square_from_json(g.at("R"), m, "R");
    grams.Q = square_from_json(g.at("Q"), m, "Q");
    const auto& cond = g.at("condition_estimate");
    grams.condition_estimate = cond.is_number() ? cond.get<double>() : std::numeric_limits<double>::infinity();
    grams.node_count = g.value("node_count", Eigen::Index{0});
    grams.hull_volume = g.value("hull_volume", 0.0);
    model.grams = std::move(grams);
  }
  if (!model.A.allFinite()) throw Error(ErrorCode::SchemaError, "A holds non-finite entries");
  return model;
}

void write_model(const KoopmanModel& model, const std::filesystem::path& path) { write_json(model.to_json(), path); }

KoopmanModel read_model(const std::filesystem::path& path) { return KoopmanModel::from_json(read_json(path)); }

}  // namespace kdde
