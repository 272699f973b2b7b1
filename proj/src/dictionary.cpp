#include "kdde/dictionary.hpp"

#include <cmath>
#include <fstream>

#include "kdde/error.hpp"

namespace kdde {

using nlohmann::json;

std::string to_string(DictionaryKind kind) {
  switch (kind) {
    case DictionaryKind::StateOnly: return "state_only";
    case DictionaryKind::RbfGrid: return "rbf_grid";
    case DictionaryKind::MlpImported: return "mlp_imported";
    case DictionaryKind::Composite: return "composite";
  }
  return "composite";
}

std::string to_string(Activation act) { return act == Activation::ReLU ? "relu" : "linear"; }

namespace {

DictionaryKind parse_kind(const std::string& s) {
  if (s == "state_only") return DictionaryKind::StateOnly;
  if (s == "rbf_grid") return DictionaryKind::RbfGrid;
  if (s == "mlp_imported") return DictionaryKind::MlpImported;
  if (s == "composite") return DictionaryKind::Composite;
  throw Error(ErrorCode::SchemaError, "unknown dictionary kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "linear") return Activation::Linear;
  throw Error(ErrorCode::SchemaError, "unknown activation '" + s + "'");
}

Matrix matrix_from_json(const json& rows, const char* what) {
  if (!rows.is_array()) throw Error(ErrorCode::SchemaError, std::string(what) + " must be an array of rows");
  const auto r = static_cast<Eigen::Index>(rows.size());
  if (r == 0) return Matrix(0, 0);
  if (!rows[0].is_array()) throw Error(ErrorCode::SchemaError, std::string(what) + " rows must be arrays");
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw Error(ErrorCode::SchemaError, std::string(what) + " is ragged");
    for (Eigen::Index k = 0; k < c; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw Error(ErrorCode::SchemaError, std::string(what) + " holds a non-number");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& arr, const char* what) {
  if (!arr.is_array()) throw Error(ErrorCode::SchemaError, std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw Error(ErrorCode::SchemaError, std::string(what) + " holds a non-number");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

int block_width(const DictionaryBlock& block, int input_dim) {
  return std::visit(
      [&](const auto& b) -> int {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, StateBlock>) return input_dim;
        else if constexpr (std::is_same_v<T, ConstantBlock>) return 1;
        else if constexpr (std::is_same_v<T, RbfBlock>) return static_cast<int>(b.centers.rows());
        else return b.weights.output_dim();
      },
      block);
}

}  // namespace

// ---------------------------------------------------------------------------
// MLP weights

int MlpWeights::output_dim() const {
  return layers.empty() ? input_dim : static_cast<int>(layers.back().weight.rows());
}

void MlpWeights::validate() const {
  if (input_dim <= 0) throw Error(ErrorCode::SchemaError, "input_dim must be positive");
  if (layers.empty()) throw Error(ErrorCode::SchemaError, "at least one layer is required");
  Eigen::Index width = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.cols() != width)
      throw Error(ErrorCode::SchemaError, "layer " + std::to_string(i) + " expects " +
                                              std::to_string(layer.weight.cols()) + " inputs, previous width is " +
                                              std::to_string(width));
    if (layer.weight.rows() == 0 || layer.bias.size() != layer.weight.rows())
      throw Error(ErrorCode::SchemaError, "layer " + std::to_string(i) + " bias length does not match its width");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw Error(ErrorCode::SchemaError, "layer " + std::to_string(i) + " holds non-finite parameters");
    width = layer.weight.rows();
  }
}

MlpWeights parse_mlp_weights(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "weight file must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "input_dim" && key != "layers" && key != "include_state" && key != "output_dim")
      throw Error(ErrorCode::SchemaError, "unknown key '" + key + "' in weight file");
  }
  if (!j.contains("input_dim") || !j["input_dim"].is_number_integer())
    throw Error(ErrorCode::SchemaError, "missing integer 'input_dim'");
  if (!j.contains("layers") || !j["layers"].is_array())
    throw Error(ErrorCode::SchemaError, "missing 'layers' array");

  MlpWeights w;
  w.input_dim = j["input_dim"].get<int>();
  w.include_state = j.value("include_state", false);
  for (const auto& layer : j["layers"]) {
    if (!layer.is_object() || !layer.contains("w") || !layer.contains("b") || !layer.contains("act"))
      throw Error(ErrorCode::SchemaError, "each layer needs 'w', 'b' and 'act'");
    DenseLayer dl;
    dl.weight = matrix_from_json(layer["w"], "layer weight");
    dl.bias = vector_from_json(layer["b"], "layer bias");
    if (!layer["act"].is_string()) throw Error(ErrorCode::SchemaError, "'act' must be a string");
    dl.activation = parse_activation(layer["act"].get<std::string>());
    w.layers.push_back(std::move(dl));
  }
  w.validate();
  if (j.contains("output_dim") && j["output_dim"].get<int>() != w.output_dim())
    throw Error(ErrorCode::SchemaError, "declared output_dim does not match the last layer width");
  return w;
}

MlpWeights read_mlp_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open weight file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, "malformed weight file " + path.string() + ": " + e.what());
  }
  return parse_mlp_weights(j);
}

json to_json(const MlpWeights& weights) {
  json layers = json::array();
  for (const auto& layer : weights.layers) {
    layers.push_back({{"w", matrix_to_json(layer.weight)},
                      {"b", vector_to_json(layer.bias)},
                      {"act", to_string(layer.activation)}});
  }
  return {{"input_dim", weights.input_dim}, {"layers", layers}, {"include_state", weights.include_state}};
}

Vector mlp_forward(const MlpWeights& weights, const Eigen::Ref<const Vector>& x) {
  Vector h = x;
  for (const auto& layer : weights.layers) {
    Vector next = layer.weight * h + layer.bias;
    if (layer.activation == Activation::ReLU) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(int input_dim, std::vector<DictionaryBlock> blocks, DictionaryKind kind)
    : input_dim_(input_dim), output_dim_(0), kind_(kind), blocks_(std::move(blocks)) {
  if (input_dim_ <= 0) throw Error(ErrorCode::SpecError, "dictionary input_dim must be positive");
  for (const auto& block : blocks_) {
    if (const auto* rbf = std::get_if<RbfBlock>(&block)) {
      if (rbf->centers.cols() != input_dim_ || rbf->widths.size() != input_dim_)
        throw Error(ErrorCode::DimensionMismatch, "RBF block dimension does not match input_dim");
      if ((rbf->widths.array() <= 0.0).any() || !rbf->widths.allFinite())
        throw Error(ErrorCode::SpecError, "RBF widths must be positive");
    } else if (const auto* mlp = std::get_if<MlpBlock>(&block)) {
      mlp->weights.validate();
      if (mlp->weights.input_dim != input_dim_)
        throw Error(ErrorCode::DimensionMismatch, "MLP input_dim " + std::to_string(mlp->weights.input_dim) +
                                                      " does not match dictionary input_dim " +
                                                      std::to_string(input_dim_));
    } else if (std::holds_alternative<StateBlock>(block) && !state_) {
      state_ = StateRange{output_dim_, input_dim_};
    }
    output_dim_ += block_width(block, input_dim_);
  }
  if (output_dim_ < 1) throw Error(ErrorCode::SpecError, "dictionary must have at least one observable");
}

Dictionary Dictionary::state_only(int input_dim) {
  return Dictionary(input_dim, {StateBlock{}}, DictionaryKind::StateOnly);
}

void Dictionary::lift_into(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
  Eigen::Index pos = 0;
  for (const auto& block : blocks_) {
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, StateBlock>) {
            out.segment(pos, input_dim_) = x;
            pos += input_dim_;
          } else if constexpr (std::is_same_v<T, ConstantBlock>) {
            out(pos++) = 1.0;
          } else if constexpr (std::is_same_v<T, RbfBlock>) {
            const Vector inv_two_var = (2.0 * b.widths.array().square()).inverse();
            for (Eigen::Index k = 0; k < b.centers.rows(); ++k) {
              const double r2 =
                  ((x.transpose() - b.centers.row(k)).array().square() * inv_two_var.transpose().array()).sum();
              out(pos++) = std::exp(-r2);
            }
          } else {
            const Vector h = mlp_forward(b.weights, x);
            out.segment(pos, h.size()) = h;
            pos += h.size();
          }
        },
        block);
  }
}

Vector Dictionary::lift(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != input_dim_)
    throw Error(ErrorCode::DimensionMismatch,
                "state has length " + std::to_string(x.size()) + ", dictionary expects " + std::to_string(input_dim_));
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "state contains NaN or Inf");
  Vector z(output_dim_);
  lift_into(x, z);
  return z;
}

Matrix Dictionary::lift_rows(const Matrix& states) const {
  if (states.cols() != input_dim_)
    throw Error(ErrorCode::DimensionMismatch, "state matrix has " + std::to_string(states.cols()) +
                                                  " columns, dictionary expects " + std::to_string(input_dim_));
  if (!states.allFinite()) throw Error(ErrorCode::NonFiniteInput, "state matrix contains NaN or Inf");
  Matrix z(states.rows(), output_dim_);
  Vector x(input_dim_);
  Vector buf(output_dim_);
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    x = states.row(i).transpose();
    lift_into(x, buf);
    z.row(i) = buf.transpose();
  }
  return z;
}

Vector Dictionary::extract_state(const Eigen::Ref<const Vector>& z) const {
  if (!state_) throw Error(ErrorCode::NotStateInclusive, "dictionary has no state block");
  if (z.size() != output_dim_)
    throw Error(ErrorCode::DimensionMismatch, "lifted vector has the wrong length");
  return z.segment(state_->begin, state_->size);
}

json Dictionary::to_json() const {
  json blocks = json::array();
  for (const auto& block : blocks_) {
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, StateBlock>) {
            blocks.push_back({{"type", "state"}});
          } else if constexpr (std::is_same_v<T, ConstantBlock>) {
            blocks.push_back({{"type", "constant"}});
          } else if constexpr (std::is_same_v<T, RbfBlock>) {
            blocks.push_back({{"type", "rbf"}, {"centers", matrix_to_json(b.centers)}, {"widths", vector_to_json(b.widths)}});
          } else {
            json w = kdde::to_json(b.weights);
            w.erase("include_state");
            blocks.push_back({{"type", "mlp"}, {"weights", w}});
          }
        },
        block);
  }
  return {{"kind", to_string(kind_)}, {"input_dim", input_dim_}, {"output_dim", output_dim_}, {"blocks", blocks}};
}

Dictionary Dictionary::from_json(const json& j) {
  if (!j.is_object() || !j.contains("input_dim") || !j.contains("blocks"))
    throw Error(ErrorCode::SchemaError, "dictionary descriptor needs 'input_dim' and 'blocks'");
  const int n = j["input_dim"].get<int>();
  const DictionaryKind kind = parse_kind(j.value("kind", std::string("composite")));
  std::vector<DictionaryBlock> blocks;
  for (const auto& b : j["blocks"]) {
    const auto type = b.at("type").get<std::string>();
    if (type == "state") {
      blocks.emplace_back(StateBlock{});
    } else if (type == "constant") {
      blocks.emplace_back(ConstantBlock{});
    } else if (type == "rbf") {
      blocks.emplace_back(RbfBlock{matrix_from_json(b.at("centers"), "rbf centers"), vector_from_json(b.at("widths"), "rbf widths")});
    } else if (type == "mlp") {
      blocks.emplace_back(MlpBlock{parse_mlp_weights(b.at("weights"))});
    } else {
      throw Error(ErrorCode::SchemaError, "unknown dictionary block type '" + type + "'");
    }
  }
  Dictionary d(n, std::move(blocks), kind);
  if (j.contains("output_dim") && j["output_dim"].get<int>() != d.output_dim())
    throw Error(ErrorCode::SchemaError, "descriptor output_dim does not match its blocks");
  return d;
}

// ---------------------------------------------------------------------------
// Builders

Dictionary make_rbf_grid(const Box& bounds, std::span<const int> grid_shape, SpacingScaled width_rule) {
  const auto n = bounds.dim();
  if (n <= 0 || bounds.hi.size() != n) throw Error(ErrorCode::DimensionMismatch, "bounds are malformed");
  if (static_cast<Eigen::Index>(grid_shape.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "grid shape has " + std::to_string(grid_shape.size()) +
                                                  " entries for a " + std::to_string(n) + "-dimensional box");
  if (!(width_rule.factor > 0.0)) throw Error(ErrorCode::SpecError, "width factor must be positive");
  const Vector extent = bounds.extent();
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!(extent(d) > 0.0) || !std::isfinite(extent(d)))
      throw Error(ErrorCode::DegenerateBounds, "box side " + std::to_string(d) + " has zero length");
    if (grid_shape[static_cast<std::size_t>(d)] < 1) throw Error(ErrorCode::SpecError, "grid shape entries must be >= 1");
  }

  Eigen::Index count = 1;
  for (int s : grid_shape) count *= s;

  Vector widths(n);
  std::vector<Vector> axes(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < n; ++d) {
    const int k = grid_shape[static_cast<std::size_t>(d)];
    Vector& axis = axes[static_cast<std::size_t>(d)];
    if (k == 1) {
      axis = Vector::Constant(1, 0.5 * (bounds.lo(d) + bounds.hi(d)));
      widths(d) = extent(d) * width_rule.factor;
    } else {
      axis = Vector::LinSpaced(k, bounds.lo(d), bounds.hi(d));
      widths(d) = extent(d) / (k - 1) * width_rule.factor;
    }
  }

  Matrix centers(count, n);
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (Eigen::Index row = 0; row < count; ++row) {
    for (Eigen::Index d = 0; d < n; ++d) centers(row, d) = axes[static_cast<std::size_t>(d)](idx[static_cast<std::size_t>(d)]);
    for (Eigen::Index d = n - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < grid_shape[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }

  return Dictionary(static_cast<int>(n), {StateBlock{}, RbfBlock{std::move(centers), std::move(widths)}},
                    DictionaryKind::RbfGrid);
}

Dictionary load_mlp_dictionary(const MlpWeights& weights, bool include_state) {
  weights.validate();
  std::vector<DictionaryBlock> blocks;
  if (include_state) blocks.emplace_back(StateBlock{});
  MlpWeights copy = weights;
  copy.include_state = false;
  blocks.emplace_back(MlpBlock{std::move(copy)});
  return Dictionary(weights.input_dim, std::move(blocks), DictionaryKind::MlpImported);
}

}  // namespace kdde
