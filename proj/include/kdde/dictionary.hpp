#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdde/types.hpp"

namespace kdde {

enum class DictionaryKind { StateOnly, RbfGrid, MlpImported, Composite };
enum class Activation { ReLU, Linear };

std::string to_string(DictionaryKind kind);
std::string to_string(Activation act);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Linear;
};

/// Hidden stack of a feed-forward network whose last layer outputs the
/// learned observables.
struct MlpWeights {
  int input_dim = 0;
  std::vector<DenseLayer> layers;
  bool include_state = false;

  int output_dim() const;
  /// Throws SchemaError when layer shapes do not chain.
  void validate() const;
};

MlpWeights parse_mlp_weights(const nlohmann::json& j);
MlpWeights read_mlp_weights(const std::filesystem::path& path);
nlohmann::json to_json(const MlpWeights& weights);

/// Raw state pass-through: contributes x itself.
struct StateBlock {};

/// g == 1.
struct ConstantBlock {};

/// Anisotropic Gaussian bumps exp(-sum_d (x_d - c_d)^2 / (2 sigma_d^2)).
struct RbfBlock {
  Matrix centers;  // k x n, one center per row
  Vector widths;   // n, per-axis sigma
};

struct MlpBlock {
  MlpWeights weights;
};

using DictionaryBlock = std::variant<StateBlock, ConstantBlock, RbfBlock, MlpBlock>;

/// Index range [begin, begin + size) of z(x) that carries x unchanged.
struct StateRange {
  Eigen::Index begin = 0;
  Eigen::Index size = 0;
};

/// Ordered set of m scalar observables lifting x in R^n to z(x) in R^m.
///
/// Immutable after construction; lift() is safe to call concurrently.
/// Observables are laid out block by block in construction order, so the
/// state block (when present first) is the fixed prefix z[0:n].
class Dictionary {
 public:
  Dictionary(int input_dim, std::vector<DictionaryBlock> blocks,
             DictionaryKind kind = DictionaryKind::Composite);

  static Dictionary state_only(int input_dim);

  DictionaryKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::optional<StateRange>& state_block() const { return state_; }
  bool state_inclusive() const { return state_.has_value(); }
  const std::vector<DictionaryBlock>& blocks() const { return blocks_; }

  /// z(x). Throws DimensionMismatch / NonFiniteInput.
  Vector lift(const Eigen::Ref<const Vector>& x) const;

  /// Lifts every row of `states` (N x n); returns N x m.
  Matrix lift_rows(const Matrix& states) const;

  /// Reads the state slice out of a lifted vector. Throws NotStateInclusive.
  Vector extract_state(const Eigen::Ref<const Vector>& z) const;

  nlohmann::json to_json() const;
  static Dictionary from_json(const nlohmann::json& j);

 private:
  void lift_into(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const;

  int input_dim_;
  int output_dim_;
  DictionaryKind kind_;
  std::vector<DictionaryBlock> blocks_;
  std::optional<StateRange> state_;
};

struct SpacingScaled {
  double factor = 1.0;
};

/// State variables followed by a uniform tensor grid of Gaussian RBFs over
/// `bounds`, centers in row-major order (last axis fastest). Each axis uses
/// sigma_d = spacing_d * factor; an axis with a single center uses the box
/// side length as its spacing.
Dictionary make_rbf_grid(const Box& bounds, std::span<const int> grid_shape,
                         SpacingScaled width_rule = {});

/// Dictionary whose observables are the outputs of the hidden stack in
/// `weights`, optionally preceded by the raw state.
Dictionary load_mlp_dictionary(const MlpWeights& weights, bool include_state);

Vector mlp_forward(const MlpWeights& weights, const Eigen::Ref<const Vector>& x);

}  // namespace kdde
