#include "kdde/eval.hpp"

#include <fstream>
#include <iomanip>

#include "kdde/encoder.hpp"
#include "kdde/error.hpp"

namespace kdde {

EvalDomain EvalDomain::rectangle(const Box& box) { return EvalDomain{box, nullptr}; }

EvalDomain EvalDomain::hull_of(const Matrix& points) {
  auto mesh = std::make_shared<SimplicialMesh>(build_mesh(points));
  return EvalDomain{bounding_box(points), std::move(mesh)};
}

bool EvalDomain::contains(const Eigen::Ref<const Vector>& x) const {
  if (!box.contains(x, 1e-12 * box.extent().norm())) return false;
  return !hull || hull->contains(x);
}

nlohmann::json EvalReport::summary_json() const {
  return {{"shape", shape},
          {"box", {{"lo", std::vector<double>(box.lo.data(), box.lo.data() + box.lo.size())},
                   {"hi", std::vector<double>(box.hi.data(), box.hi.data() + box.hi.size())}}},
          {"total_sse", total_sse},
          {"sse_variance", sse_variance},
          {"mean_sse", mean_sse},
          {"cells_in_range", cells_in_range},
          {"model", model_meta}};
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const auto n = cell_centers.cols();
  out << "cell";
  for (Eigen::Index d = 0; d < n; ++d) out << ",x" << d + 1;
  out << ",sse,in_range\n" << std::setprecision(17);
  for (Eigen::Index c = 0; c < cell_centers.rows(); ++c) {
    out << c;
    for (Eigen::Index d = 0; d < n; ++d) out << ',' << cell_centers(c, d);
    out << ',' << cell_sse(c) << ',' << static_cast<int>(mask[static_cast<std::size_t>(c)]) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed while writing " + path.string());
}

void summarize(EvalReport& report) {
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index c = 0; c < report.cell_sse.size(); ++c) {
    if (!report.mask[static_cast<std::size_t>(c)]) continue;
    total += report.cell_sse(c);
    ++count;
  }
  report.total_sse = total;
  report.cells_in_range = count;
  report.mean_sse = count ? total / static_cast<double>(count) : 0.0;
  double var = 0.0;
  for (Eigen::Index c = 0; c < report.cell_sse.size(); ++c) {
    if (!report.mask[static_cast<std::size_t>(c)]) continue;
    const double d = report.cell_sse(c) - report.mean_sse;
    var += d * d;
  }
  report.sse_variance = count ? var / static_cast<double>(count) : 0.0;
}

EvalReport sse_grid(const KoopmanModel& model, const TruthMap& truth, const EvalDomain& domain,
                    std::span<const int> resolution) {
  const Dictionary& dict = model.dictionary;
  if (!dict.state_inclusive()) throw Error(ErrorCode::NotStateInclusive, "evaluation needs a state-inclusive dictionary");
  const auto n = domain.box.dim();
  if (n != dict.input_dim()) throw Error(ErrorCode::DimensionMismatch, "evaluation box does not match the model");
  if (static_cast<Eigen::Index>(resolution.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "grid resolution needs one entry per state variable");
  Eigen::Index cells = 1;
  for (int r : resolution) {
    if (r < 1) throw Error(ErrorCode::SpecError, "grid resolution entries must be >= 1");
    cells *= r;
  }

  EvalReport report;
  report.shape.assign(resolution.begin(), resolution.end());
  report.box = domain.box;
  report.cell_centers.resize(cells, n);
  report.cell_sse = Vector::Zero(cells);
  report.mask.assign(static_cast<std::size_t>(cells), 0);
  report.model_meta = {{"method", to_string(model.method)}, {"observables", dict.output_dim()}};

  const Vector width = domain.box.extent().array() / Eigen::Map<const Eigen::VectorXi>(resolution.data(), n).cast<double>().array();
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (Eigen::Index c = 0; c < cells; ++c) {
    for (Eigen::Index d = 0; d < n; ++d)
      report.cell_centers(c, d) = domain.box.lo(d) + (idx[static_cast<std::size_t>(d)] + 0.5) * width(d);
    for (Eigen::Index d = n - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < resolution[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }

  std::vector<Eigen::Index> inside;
  for (Eigen::Index c = 0; c < cells; ++c) {
    if (domain.contains(report.cell_centers.row(c).transpose())) {
      report.mask[static_cast<std::size_t>(c)] = 1;
      inside.push_back(c);
    }
  }
  Matrix states(static_cast<Eigen::Index>(inside.size()), n);
  for (std::size_t i = 0; i < inside.size(); ++i) states.row(static_cast<Eigen::Index>(i)) = report.cell_centers.row(inside[i]);
  const Matrix predicted = predict_one_step(model, states);
  for (std::size_t i = 0; i < inside.size(); ++i) {
    const Vector x = states.row(static_cast<Eigen::Index>(i)).transpose();
    const Vector err = predicted.row(static_cast<Eigen::Index>(i)).transpose() - truth(x);
    report.cell_sse(inside[i]) = err.squaredNorm();
  }
  summarize(report);
  return report;
}

EvalReport sse_grid(const KoopmanModel& model, const PendulumParams& truth, const EvalDomain& domain,
                    std::span<const int> resolution) {
  truth.validate();
  return sse_grid(
      model, [&truth](const Vector& x) -> Vector { return pendulum_step(truth, Eigen::Vector2d(x(0), x(1))); }, domain,
      resolution);
}

Vector ConvergenceTrace::last_relative_change() const {
  const auto rows = q_values.rows();
  if (rows < 2) throw Error(ErrorCode::SpecError, "a convergence trace needs at least two sizes");
  const auto last = q_values.row(rows - 1).array();
  const auto prev = q_values.row(rows - 2).array();
  return ((last - prev).abs() / prev.abs()).transpose();
}

void ConvergenceTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "N,entry_id,value\n" << std::setprecision(17);
  for (std::size_t s = 0; s < selectors.size(); ++s)
    for (std::size_t k = 0; k < sizes.size(); ++k)
      out << sizes[k] << ',' << selectors[s].label << ',' << q_values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) << '\n';
  for (std::size_t s = 0; s < selectors.size(); ++s)
    for (std::size_t k = 0; k < sizes.size(); ++k)
      out << sizes[k] << ",R" << selectors[s].label.substr(1) << ',' << r_values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed while writing " + path.string());
}

}  // namespace kdde
