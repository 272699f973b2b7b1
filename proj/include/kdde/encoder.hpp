#pragma once

#include <vector>

#include "kdde/dataset.hpp"
#include "kdde/dictionary.hpp"
#include "kdde/mesh.hpp"
#include "kdde/model.hpp"

namespace kdde {

/// R = sum_k w_k z_k z_k^T and Q = sum_k w_k z'_k z_k^T for lifted rows
/// z_k (current) and z'_k (next).
GramPair weighted_grams(const Matrix& lifted_current, const Matrix& lifted_next, const Vector& weights);

/// Mesh-weighted Gram matrices: every node contributes its lifted outer
/// products scaled by its node volume. Samples merged into one node share
/// that node's coordinates and contribute the mean of their targets.
/// Throws MeshDataMismatch when `data` is not the sample set the mesh was
/// built from.
GramPair compute_grams(const TransitionDataset& data, const Dictionary& dict, const SimplicialMesh& mesh);

struct Assembly {
  Matrix A;
  double residual = 0.0;  // ||A (R + ridge I) - Q||_F / ||Q||_F
};

/// A = Q (R + ridge I)^{-1} via a symmetric factorization of R + ridge I.
/// Throws SingularGram when ridge == 0 and R is numerically singular.
Assembly assemble(const GramPair& grams, double ridge = 0.0);

/// Condition number above which an unregularized R is rejected.
double singular_gram_threshold();

struct DdeOptions {
  double ridge = 0.0;
  MeshOptions mesh;
};

/// Mesh the current states, weight nodes by volume, build R and Q, solve.
KoopmanModel fit_dde(const TransitionDataset& data, const Dictionary& dict, const DdeOptions& options = {});

/// Same as fit_dde on an already built mesh of data.current.
KoopmanModel fit_dde(const TransitionDataset& data, const Dictionary& dict, const SimplicialMesh& mesh,
                     const DdeOptions& options = {});

enum class Rollout {
  Lifted,  // z <- A z, never re-lifted
  Relift,  // read the state out after each step and lift it again
};

/// Predicted states after 1..steps applications of the model.
/// Throws NotStateInclusive.
std::vector<Vector> predict(const KoopmanModel& model, const Eigen::Ref<const Vector>& x, int steps,
                            Rollout mode = Rollout::Lifted);

/// One-step state predictions for every row of `states`.
Matrix predict_one_step(const KoopmanModel& model, const Matrix& states);

}  // namespace kdde
