#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include "kdde/edmd.hpp"
#include "kdde/encoder.hpp"
#include "kdde/eval.hpp"
#include "kdde/experiments.hpp"
#include "support.hpp"

using namespace kdde;
using kdde::testing::error_of;
using kdde::testing::grid_points;

namespace {

const std::vector<int> k100{100, 100};

Box pendulum_box() { return Box{Eigen::Vector2d(-0.8, -2.0), Eigen::Vector2d(0.8, 2.0)}; }

KoopmanModel uniform_model(FitMethod method) {
  DatasetSpec spec;
  spec.size = 900;
  const TransitionDataset data = generate(spec);
  return fit(method, data, make_rbf_grid(pendulum_box(), std::vector<int>{5, 5}), {});
}

}  // namespace

TEST_CASE("an exact model has no error") {
  Eigen::Matrix2d L;
  L << 0.9, 0.0, 0.0, 0.8;
  const Matrix pts = grid_points(50, 50, -1, 1, -1, 1);
  const KoopmanModel m = fit_dde({pts, pts * L.transpose(), {}}, Dictionary::state_only(2));
  const TruthMap truth = [&L](const Vector& x) -> Vector { return L * x; };
  const Box box{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
  const EvalReport r = sse_grid(m, truth, EvalDomain::rectangle(box), k100);
  CHECK(r.total_sse < 1e-12);
  CHECK(r.cells_in_range == 10000);
}

TEST_CASE("report totals, variance and cell layout") {
  const KoopmanModel m = uniform_model(FitMethod::DDE);
  const std::vector<int> res{40, 25};
  const EvalReport r = sse_grid(m, PendulumParams{}, EvalDomain::rectangle(pendulum_box()), res);
  REQUIRE(r.cell_sse.size() == 1000);
  CHECK(r.shape == res);
  CHECK((r.cell_sse.array() >= 0.0).all());
  CHECK(r.total_sse == doctest::Approx(r.cell_sse.sum()).epsilon(1e-12));
  const double mean = r.cell_sse.mean();
  CHECK(r.sse_variance == doctest::Approx((r.cell_sse.array() - mean).square().mean()).epsilon(1e-12));
  // Row-major cells, last axis fastest; first cell center is half a cell in.
  CHECK(r.cell_centers(0, 0) == doctest::Approx(-0.8 + 0.02));
  CHECK(r.cell_centers(0, 1) == doctest::Approx(-2.0 + 0.08));
  CHECK(r.cell_centers(1, 0) == doctest::Approx(-0.8 + 0.02));
  CHECK(r.cell_centers(1, 1) == doctest::Approx(-2.0 + 0.24));
  CHECK(r.cell_centers(25, 0) == doctest::Approx(-0.8 + 0.06));

  const Vector x = r.cell_centers.row(137).transpose();
  const Vector err = predict_one_step(m, x.transpose()).row(0).transpose() - pendulum_step(PendulumParams{}, x);
  CHECK(r.cell_sse(137) == doctest::Approx(err.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("total is additive over any split of the cells") {
  const KoopmanModel m = uniform_model(FitMethod::EDMD);
  EvalReport r = sse_grid(m, PendulumParams{}, EvalDomain::rectangle(pendulum_box()), k100);
  double a = 0.0, b = 0.0;
  for (Eigen::Index c = 0; c < r.cell_sse.size(); ++c) (c % 3 == 0 ? a : b) += r.cell_sse(c);
  CHECK(a + b == doctest::Approx(r.total_sse).epsilon(1e-12));
}

TEST_CASE("hull mask drops cells outside the trajectory hull") {
  DatasetSpec spec;
  spec.kind = DatasetKind::Trajectories;
  spec.size = 2500;
  const TransitionDataset data = generate(spec);
  const EvalDomain domain = default_domain(spec.kind, spec, data);
  REQUIRE(domain.hull);
  const KoopmanModel m = fit(FitMethod::DDE, data, make_rbf_grid(bounding_box(data.current), std::vector<int>{5, 5}), {});
  const EvalReport r = sse_grid(m, PendulumParams{}, domain, k100);
  CHECK(r.cells_in_range < 10000);
  CHECK(r.cells_in_range > 5000);
  double masked = 0.0;
  for (Eigen::Index c = 0; c < r.cell_sse.size(); ++c) {
    if (!r.mask[static_cast<std::size_t>(c)]) CHECK(r.cell_sse(c) == 0.0);
    else masked += r.cell_sse(c);
    CHECK(static_cast<bool>(r.mask[static_cast<std::size_t>(c)]) ==
          domain.hull->contains(r.cell_centers.row(c).transpose()));
  }
  CHECK(masked == doctest::Approx(r.total_sse).epsilon(1e-12));
}

TEST_CASE("finer grids keep the mean cell error") {
  const KoopmanModel m = uniform_model(FitMethod::DDE);
  const EvalDomain box = EvalDomain::rectangle(pendulum_box());
  const EvalReport coarse = sse_grid(m, PendulumParams{}, box, std::vector<int>{50, 50});
  const EvalReport fine = sse_grid(m, PendulumParams{}, box, k100);
  CHECK(fine.mean_sse == doctest::Approx(coarse.mean_sse).epsilon(0.05));
  CHECK(fine.total_sse / coarse.total_sse == doctest::Approx(4.0).epsilon(0.05 * 4));
}

TEST_CASE("evaluation needs a state read-out") {
  const Dictionary d(2, {ConstantBlock{}});
  const KoopmanModel m{d, Matrix::Identity(1, 1), FitMethod::DDE, std::nullopt, {}};
  CHECK(error_of([&] { sse_grid(m, PendulumParams{}, EvalDomain::rectangle(pendulum_box()), k100); }) ==
        ErrorCode::NotStateInclusive);
  const KoopmanModel ok = uniform_model(FitMethod::DDE);
  CHECK(error_of([&] { sse_grid(ok, PendulumParams{}, EvalDomain::rectangle(pendulum_box()), std::vector<int>{10}); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("trajectory data: DDE beats EDMD at 2500 points") {
  ExperimentOptions opts;
  const auto rows = size_sweep(DatasetKind::Trajectories, {2500}, opts);
  CHECK(rows[0].dde.mean_total < rows[0].edmd.mean_total);
  CHECK(rows[0].dde.mean_variance < rows[0].edmd.mean_variance);
}

TEST_CASE("gaussian protocol") {
  ExperimentOptions opts;
  SUBCASE("one repeat equals a single evaluation") {
    const auto rows = gaussian_protocol(Eigen::Vector2d(0.8, 0.0), {1000}, 1, opts);
    DatasetSpec spec;
    spec.kind = DatasetKind::GaussianCloud;
    spec.size = 1000;
    spec.center = Eigen::Vector2d(0.8, 0.0);
    spec.seed = opts.seed;
    const TransitionDataset data = generate(spec);
    const Dictionary d = opts.dictionary.build(data);
    const EvalReport dde = sse_grid(fit(FitMethod::DDE, data, d, {}), PendulumParams{}, default_domain(spec.kind, spec, data), k100);
    CHECK(rows[0].dde.mean_total == dde.total_sse);
    CHECK(rows[0].dde.std_total == 0.0);
  }
  SUBCASE("centered cloud averaged over eight seeds favours DDE") {
    const auto rows = gaussian_protocol(Eigen::Vector2d(0.0, 0.0), {1000}, 8, opts);
    CHECK(rows[0].dde.totals.size() == 8);
    CHECK(rows[0].dde.mean_total < rows[0].edmd.mean_total);
    CHECK(rows[0].edmd.std_total > 0.0);
  }
  SUBCASE("independent seed sets agree within their spread") {
    ExperimentOptions other = opts;
    other.seed = 1000;
    const auto a = gaussian_protocol(Eigen::Vector2d(0.0, 2.0), {1000}, 8, opts);
    const auto b = gaussian_protocol(Eigen::Vector2d(0.0, 2.0), {1000}, 8, other);
    const double spread = std::max(a[0].dde.std_total, b[0].dde.std_total);
    CHECK(std::abs(a[0].dde.mean_total - b[0].dde.mean_total) < 3.0 * spread);
  }
}

TEST_CASE("Q convergence traces") {
  ExperimentOptions opts;
  DatasetSpec spec;
  spec.kind = DatasetKind::Trajectories;
  spec.seed = 3;
  const std::vector<Eigen::Index> sizes{1000, 2500, 5000};

  SUBCASE("constant observable tracks the hull volume") {
    const Dictionary one(2, {ConstantBlock{}});
    const ConvergenceTrace t = q_convergence(sizes, spec, one, {{0, 0, "Q[0,0]"}}, opts);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      DatasetSpec s = spec;
      s.size = sizes[i];
      const double hull = build_mesh(generate(s).current).hull_volume;
      CHECK(t.q_values(static_cast<Eigen::Index>(i), 0) == doctest::Approx(hull).epsilon(1e-12));
      CHECK(t.r_values(static_cast<Eigen::Index>(i), 0) == doctest::Approx(hull).epsilon(1e-12));
    }
  }
  SUBCASE("default selectors and CSV output") {
    const ConvergenceTrace t = q_convergence(sizes, spec, opts);
    REQUIRE(t.selectors.size() == 4);
    CHECK(t.selectors[0].label == "Q[0,0]");
    for (std::size_t s = 1; s < 4; ++s) CHECK(t.selectors[s].row == t.selectors[s].col);
    CHECK(t.selectors[1].row >= 2);
    const auto path = std::filesystem::temp_directory_path() / "kdde_trace.csv";
    t.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "N,entry_id,value");
    int rows = 0, r_rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      if (line.find(",R[") != std::string::npos) ++r_rows;
    }
    CHECK(rows == 2 * 4 * 3);
    CHECK(r_rows == 4 * 3);
    std::filesystem::remove(path);
    CHECK(t.last_relative_change().size() == 4);
  }
  SUBCASE("sizes must increase") {
    CHECK(error_of([&] { q_convergence({2500, 1000}, spec, opts); }) == ErrorCode::SpecError);
    CHECK(error_of([&] { q_convergence({2500}, spec, opts); }) == ErrorCode::SpecError);
  }
}

TEST_CASE("report files") {
  const KoopmanModel m = uniform_model(FitMethod::DDE);
  const EvalReport r = sse_grid(m, PendulumParams{}, EvalDomain::rectangle(pendulum_box()), std::vector<int>{10, 10});
  const auto path = std::filesystem::temp_directory_path() / "kdde_eval.csv";
  r.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "cell,x1,x2,sse,in_range");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 100);
  std::filesystem::remove(path);
  const auto j = r.summary_json();
  CHECK(j.at("total_sse").get<double>() == r.total_sse);
  CHECK(j.at("model").at("method") == "dde");
}
