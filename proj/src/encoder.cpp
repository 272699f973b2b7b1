#include "kdde/encoder.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "kdde/error.hpp"

namespace kdde {

namespace {

double condition_of(const Matrix& R) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(R, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

void check_dims(const TransitionDataset& data, const Dictionary& dict) {
  data.validate();
  if (data.dim() != dict.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(data.dim()) +
                                                  " state variables, dictionary expects " +
                                                  std::to_string(dict.input_dim()));
}

}  // namespace

double singular_gram_threshold() { return 1.0 / (std::numeric_limits<double>::epsilon() * 1e3); }

GramPair weighted_grams(const Matrix& lifted_current, const Matrix& lifted_next, const Vector& weights) {
  if (lifted_current.rows() != weights.size() || lifted_next.rows() != weights.size() ||
      lifted_current.cols() != lifted_next.cols())
    throw Error(ErrorCode::DimensionMismatch, "lifted data and weights disagree in shape");
  GramPair g;
  const Matrix weighted = weights.asDiagonal() * lifted_current;  // K x m
  // Same product for both, so identity dynamics give Q == R bit for bit.
  // R is symmetric up to rounding; the LDLT solve reads one triangle.
  g.R = lifted_current.transpose() * weighted;
  g.Q = lifted_next.transpose() * weighted;
  g.condition_estimate = condition_of(g.R);
  g.node_count = weights.size();
  g.hull_volume = weights.sum();
  return g;
}

GramPair compute_grams(const TransitionDataset& data, const Dictionary& dict, const SimplicialMesh& mesh) {
  check_dims(data, dict);
  if (data.size() != mesh.sample_count())
    throw Error(ErrorCode::MeshDataMismatch, "dataset has " + std::to_string(data.size()) + " samples, mesh was built from " +
                                                 std::to_string(mesh.sample_count()));
  if (data.dim() != mesh.dim) throw Error(ErrorCode::MeshDataMismatch, "mesh dimension differs from dataset");

  const Eigen::Index nodes = mesh.node_count();
  Matrix targets = Matrix::Zero(nodes, data.dim());
  Vector counts = Vector::Zero(nodes);
  const double diag = (mesh.nodes.colwise().maxCoeff() - mesh.nodes.colwise().minCoeff()).norm();
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::Index k = mesh.node_of_sample[static_cast<std::size_t>(i)];
    if ((data.current.row(i) - mesh.nodes.row(k)).norm() > 1e-8 * diag)
      throw Error(ErrorCode::MeshDataMismatch, "sample " + std::to_string(i) + " is not located at its mesh node");
    targets.row(k) += data.next.row(i);
    counts(k) += 1.0;
  }
  targets.array().colwise() /= counts.array();

  GramPair g = weighted_grams(dict.lift_rows(mesh.nodes), dict.lift_rows(targets), mesh.node_volumes);
  g.hull_volume = mesh.hull_volume;
  return g;
}

Assembly assemble(const GramPair& grams, double ridge) {
  const Eigen::Index m = grams.R.rows();
  if (grams.R.cols() != m || grams.Q.rows() != m || grams.Q.cols() != m)
    throw Error(ErrorCode::DimensionMismatch, "R and Q must be square and of equal size");
  if (!(ridge >= 0.0)) throw Error(ErrorCode::SpecError, "ridge must be nonnegative");
  if ((grams.R - grams.R.transpose()).norm() > 1e-10 * std::max(1.0, grams.R.norm()))
    throw Error(ErrorCode::SpecError, "R is not symmetric");

  const double cond = grams.condition_estimate > 0.0 ? grams.condition_estimate : condition_of(grams.R);
  if (ridge == 0.0 && !(cond <= singular_gram_threshold()))
    throw Error(ErrorCode::SingularGram, "R has condition estimate " + std::to_string(cond) +
                                             "; the dictionary is dependent on this data (use a ridge term)");

  Matrix lhs = grams.R;
  lhs.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(lhs);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularGram, "factorization of R failed");
  Assembly out;
  out.A = ldlt.solve(grams.Q.transpose()).transpose();
  const double qnorm = grams.Q.norm();
  out.residual = (out.A * lhs - grams.Q).norm() / (qnorm > 0 ? qnorm : 1.0);
  if (!out.A.allFinite()) throw Error(ErrorCode::SingularGram, "solve produced non-finite entries");
  return out;
}

KoopmanModel fit_dde(const TransitionDataset& data, const Dictionary& dict, const DdeOptions& options) {
  check_dims(data, dict);
  const SimplicialMesh mesh = build_mesh(data.current, options.mesh);
  return fit_dde(data, dict, mesh, options);
}

KoopmanModel fit_dde(const TransitionDataset& data, const Dictionary& dict, const SimplicialMesh& mesh,
                     const DdeOptions& options) {
  GramPair grams = compute_grams(data, dict, mesh);
  Assembly solved = assemble(grams, options.ridge);

  std::size_t out_of_hull = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (!mesh.contains(data.next.row(i).transpose())) ++out_of_hull;

  KoopmanModel model{dict, std::move(solved.A), FitMethod::DDE, std::nullopt, nlohmann::json::object()};
  model.meta = {{"samples", data.size()},
                {"nodes", mesh.node_count()},
                {"simplices", mesh.simplex_count()},
                {"dropped_slivers", mesh.dropped_slivers},
                {"hull_volume", mesh.hull_volume},
                {"out_of_hull_targets", out_of_hull},
                {"ridge", options.ridge},
                {"condition_estimate", std::isfinite(grams.condition_estimate) ? nlohmann::json(grams.condition_estimate)
                                                                                : nlohmann::json("inf")},
                {"residual", solved.residual},
                {"dataset", data.provenance}};
  model.grams = std::move(grams);
  return model;
}

std::vector<Vector> predict(const KoopmanModel& model, const Eigen::Ref<const Vector>& x, int steps, Rollout mode) {
  const Dictionary& dict = model.dictionary;
  if (!dict.state_inclusive()) throw Error(ErrorCode::NotStateInclusive, "prediction needs a state-inclusive dictionary");
  if (steps < 1) throw Error(ErrorCode::SpecError, "steps must be >= 1");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(steps));
  Vector z = dict.lift(x);
  for (int s = 0; s < steps; ++s) {
    z = model.A * z;
    Vector state = dict.extract_state(z);
    if (mode == Rollout::Relift && s + 1 < steps) z = dict.lift(state);
    out.push_back(std::move(state));
  }
  return out;
}

Matrix predict_one_step(const KoopmanModel& model, const Matrix& states) {
  const Dictionary& dict = model.dictionary;
  if (!dict.state_inclusive()) throw Error(ErrorCode::NotStateInclusive, "prediction needs a state-inclusive dictionary");
  const auto& range = *dict.state_block();
  const Matrix z = dict.lift_rows(states);                                   // N x m
  return z * model.A.middleRows(range.begin, range.size).transpose();        // N x n
}

}  // namespace kdde
