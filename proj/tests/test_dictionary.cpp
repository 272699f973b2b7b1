#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "kdde/dictionary.hpp"
#include "support.hpp"

using namespace kdde;
using kdde::testing::error_of;

namespace {

Box pendulum_box() { return Box{Eigen::Vector2d(-0.8, -2.0), Eigen::Vector2d(0.8, 2.0)}; }

MlpWeights random_mlp(int in, std::vector<int> widths, std::uint64_t seed, bool include_state) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  MlpWeights w;
  w.input_dim = in;
  w.include_state = include_state;
  int prev = in;
  for (int width : widths) {
    DenseLayer l;
    l.weight = Matrix::NullaryExpr(width, prev, [&]() { return g(rng); });
    l.bias = Vector::NullaryExpr(width, [&]() { return g(rng); });
    l.activation = Activation::ReLU;
    w.layers.push_back(l);
    prev = width;
  }
  return w;
}

// Plain loop forward pass, kept independent of the Eigen expression in the library.
std::vector<double> hand_forward(const MlpWeights& w, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (const auto& l : w.layers) {
    std::vector<double> out(static_cast<std::size_t>(l.weight.rows()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      double acc = l.bias(r);
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) acc += l.weight(r, c) * h[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = l.activation == Activation::ReLU ? std::max(acc, 0.0) : acc;
    }
    h = out;
  }
  return h;
}

}  // namespace

TEST_CASE("state dictionary passes the state through") {
  const Dictionary d = Dictionary::state_only(2);
  const Vector z = d.lift(Eigen::Vector2d(0.3, -1.2));
  REQUIRE(z.size() == 2);
  CHECK(z(0) == 0.3);
  CHECK(z(1) == -1.2);
  CHECK(d.state_inclusive());
}

TEST_CASE("lift rejects wrong length and non-finite input") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{5, 5});
  CHECK(error_of([&] { d.lift(Vector::Zero(3)); }) == ErrorCode::DimensionMismatch);
  CHECK(error_of([&] { d.lift(Eigen::Vector2d(std::nan(""), 0.0)); }) == ErrorCode::NonFiniteInput);
  CHECK(error_of([&] { d.lift(Eigen::Vector2d(std::numeric_limits<double>::infinity(), 0.0)); }) ==
        ErrorCode::NonFiniteInput);
}

TEST_CASE("RBF grid sizes") {
  CHECK(make_rbf_grid(pendulum_box(), std::vector<int>{5, 5}).output_dim() == 27);
  CHECK(make_rbf_grid(pendulum_box(), std::vector<int>{7, 7}).output_dim() == 51);
  CHECK(make_rbf_grid(pendulum_box(), std::vector<int>{9, 9}).output_dim() == 83);
  CHECK(make_rbf_grid(pendulum_box(), std::vector<int>{5, 5}).lift(Eigen::Vector2d(0.1, 0.7)).size() == 27);
}

TEST_CASE("single RBF sits at the box midpoint and equals one there") {
  const Box unit{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  const Dictionary d = make_rbf_grid(unit, std::vector<int>{1, 1});
  REQUIRE(d.output_dim() == 3);
  const auto& rbf = std::get<RbfBlock>(d.blocks()[1]);
  CHECK(rbf.centers(0, 0) == doctest::Approx(0.5));
  CHECK(rbf.centers(0, 1) == doctest::Approx(0.5));
  CHECK(d.lift(Eigen::Vector2d(0.5, 0.5))(2) == 1.0);
}

TEST_CASE("RBF centers are row-major over the box and widths follow the spacing") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{5, 5}, SpacingScaled{1.5});
  const auto& rbf = std::get<RbfBlock>(d.blocks()[1]);
  CHECK(rbf.centers(0, 0) == doctest::Approx(-0.8));
  CHECK(rbf.centers(0, 1) == doctest::Approx(-2.0));
  CHECK(rbf.centers(1, 0) == doctest::Approx(-0.8));
  CHECK(rbf.centers(1, 1) == doctest::Approx(-1.0));
  CHECK(rbf.centers(5, 0) == doctest::Approx(-0.4));
  CHECK(rbf.centers(24, 0) == doctest::Approx(0.8));
  CHECK(rbf.centers(24, 1) == doctest::Approx(2.0));
  CHECK(rbf.widths(0) == doctest::Approx(0.4 * 1.5));
  CHECK(rbf.widths(1) == doctest::Approx(1.0 * 1.5));
  for (Eigen::Index c = 0; c < rbf.centers.rows(); ++c)
    CHECK(pendulum_box().contains(rbf.centers.row(c).transpose(), 1e-12));
}

TEST_CASE("RBF value matches the Gaussian formula") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{3, 3});
  const auto& rbf = std::get<RbfBlock>(d.blocks()[1]);
  const Eigen::Vector2d x(0.13, -0.77);
  const Vector z = d.lift(x);
  for (Eigen::Index c = 0; c < 9; ++c) {
    const double dx = (x(0) - rbf.centers(c, 0)) / rbf.widths(0);
    const double dy = (x(1) - rbf.centers(c, 1)) / rbf.widths(1);
    CHECK(z(2 + c) == doctest::Approx(std::exp(-0.5 * (dx * dx + dy * dy))).epsilon(1e-14));
  }
}

TEST_CASE("degenerate RBF bounds") {
  const Box flat{Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)};
  CHECK(error_of([&] { make_rbf_grid(flat, std::vector<int>{3, 3}); }) == ErrorCode::DegenerateBounds);
}

TEST_CASE("RBF values stay in (0, 1] and the state prefix is exact") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{5, 5});
  const Matrix pts = kdde::testing::random_points(500, 2, 11, -1.0, 1.0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Vector x = pts.row(i).transpose();
    x(1) *= 2.0;
    const Vector z = d.lift(x);
    CHECK(z.allFinite());
    CHECK(d.extract_state(z) == x);
    CHECK((z.tail(25).array() > 0.0).all());
    CHECK((z.tail(25).array() <= 1.0).all());
  }
}

TEST_CASE("lift_rows agrees with lift and is deterministic") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{4, 6});
  const Matrix pts = kdde::testing::random_points(50, 2, 3, -0.8, 0.8);
  const Matrix z = d.lift_rows(pts);
  const Matrix z2 = d.lift_rows(pts);
  CHECK(z == z2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) CHECK(z.row(i).transpose() == d.lift(pts.row(i).transpose()));
}

TEST_CASE("extract_state needs a state block") {
  const Box unit{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  const Dictionary d(2, {ConstantBlock{}, std::get<RbfBlock>(make_rbf_grid(unit, std::vector<int>{2, 2}).blocks()[1])});
  CHECK_FALSE(d.state_inclusive());
  CHECK(error_of([&] { d.extract_state(d.lift(Eigen::Vector2d(0.1, 0.2))); }) == ErrorCode::NotStateInclusive);
}

TEST_CASE("dictionary JSON round trip evaluates identically") {
  const MlpWeights w = random_mlp(2, {6, 4}, 5, false);
  const Box unit{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
  const Dictionary d(2, {StateBlock{}, ConstantBlock{},
                         std::get<RbfBlock>(make_rbf_grid(unit, std::vector<int>{3, 2}).blocks()[1]), MlpBlock{w}});
  const Dictionary back = Dictionary::from_json(nlohmann::json::parse(d.to_json().dump()));
  REQUIRE(back.output_dim() == d.output_dim());
  CHECK(back.state_inclusive());
  const Matrix pts = kdde::testing::random_points(100, 2, 8, -1.0, 1.0);
  CHECK((back.lift_rows(pts) - d.lift_rows(pts)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("MLP dictionary with six inputs and 16/16/40 hidden widths has 46 observables") {
  const MlpWeights w = random_mlp(6, {16, 16, 40}, 1, true);
  const Dictionary d = load_mlp_dictionary(w, true);
  CHECK(d.output_dim() == 46);
  CHECK(d.state_block()->begin == 0);
  const Vector x = Vector::LinSpaced(6, -0.5, 0.5);
  CHECK(d.lift(x).head(6) == x);
}

TEST_CASE("identity linear layer lifts to the state") {
  MlpWeights w;
  w.input_dim = 3;
  w.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3), Activation::Linear});
  const Dictionary d = load_mlp_dictionary(w, false);
  const Eigen::Vector3d x(0.25, -4.0, 7.5);
  CHECK(d.lift(x) == Vector(x));
  CHECK_FALSE(d.state_inclusive());
}

TEST_CASE("MLP lift matches a hand-written forward pass") {
  const MlpWeights w = random_mlp(2, {16, 16, 40}, 42, true);
  const Dictionary d = load_mlp_dictionary(w, true);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{u(rng), u(rng)};
    const auto ref = hand_forward(w, x);
    const Vector z = d.lift(Eigen::Vector2d(x[0], x[1]));
    for (std::size_t k = 0; k < ref.size(); ++k)
      worst = std::max(worst, std::abs(z(2 + static_cast<Eigen::Index>(k)) - ref[k]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("MLP weight file parsing") {
  const auto good = nlohmann::json::parse(R"({"input_dim": 2, "include_state": true,
      "layers": [{"w": [[1, 0], [0, 1], [1, 1]], "b": [0, 0, -1], "act": "relu"},
                 {"w": [[1, 2, 3]], "b": [0.5], "act": "linear"}]})");
  const MlpWeights w = parse_mlp_weights(good);
  CHECK(w.output_dim() == 1);
  CHECK(w.include_state);
  CHECK(mlp_forward(w, Eigen::Vector2d(1.0, 2.0))(0) == doctest::Approx(1 + 4 + 6 + 0.5));

  SUBCASE("round trip through to_json") {
    const MlpWeights back = parse_mlp_weights(nlohmann::json::parse(to_json(w).dump()));
    CHECK(back.layers[0].weight == w.layers[0].weight);
    CHECK(back.layers[1].bias == w.layers[1].bias);
  }
  SUBCASE("layer widths must chain") {
    auto bad = good;
    bad["layers"][1]["w"] = {{1.0, 2.0}};
    CHECK(error_of([&] { parse_mlp_weights(bad); }) == ErrorCode::SchemaError);
  }
  SUBCASE("unknown keys are rejected") {
    auto bad = good;
    bad["lr"] = 0.01;
    CHECK(error_of([&] { parse_mlp_weights(bad); }) == ErrorCode::SchemaError);
  }
  SUBCASE("declared output_dim must match") {
    auto bad = good;
    bad["output_dim"] = 3;
    CHECK(error_of([&] { parse_mlp_weights(bad); }) == ErrorCode::SchemaError);
  }
  SUBCASE("unknown activation") {
    auto bad = good;
    bad["layers"][0]["act"] = "tanh";
    CHECK(error_of([&] { parse_mlp_weights(bad); }) == ErrorCode::SchemaError);
  }
  SUBCASE("malformed file") {
    const auto path = std::filesystem::temp_directory_path() / "kdde_bad_weights.json";
    std::ofstream(path) << "{\"input_dim\": 2, ";
    CHECK(error_of([&] { read_mlp_weights(path); }) == ErrorCode::SchemaError);
    std::filesystem::remove(path);
    CHECK(error_of([&] { read_mlp_weights(path); }) == ErrorCode::IoError);
  }
}

TEST_CASE("lift is safe from several threads") {
  const Dictionary d = make_rbf_grid(pendulum_box(), std::vector<int>{9, 9});
  const Matrix pts = kdde::testing::random_points(2000, 2, 4, -0.8, 0.8);
  const Matrix ref = d.lift_rows(pts);
  std::vector<Matrix> out(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) pool.emplace_back([&, t] { out[static_cast<std::size_t>(t)] = d.lift_rows(pts); });
  for (auto& th : pool) th.join();
  for (const auto& m : out) CHECK(m == ref);
}
