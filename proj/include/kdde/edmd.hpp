#pragma once

#include "kdde/dataset.hpp"
#include "kdde/dictionary.hpp"
#include "kdde/model.hpp"

namespace kdde {

struct EdmdOptions {
  /// Singular values of the lifted data matrix below rcond * sigma_max are
  /// treated as zero.
  double rcond = 1e-12;
};

struct EdmdSolution {
  Matrix A;
  Eigen::Index rank = 0;
  double sigma_max = 0.0;
  double sigma_min_kept = 0.0;
};

/// Minimum-norm least-squares A for lifted rows: minimizes
/// sum_t ||z'_t - A z_t||^2 through an SVD of the lifted data.
EdmdSolution edmd_solve(const Matrix& lifted_current, const Matrix& lifted_next, double rcond);

KoopmanModel fit_edmd(const TransitionDataset& data, const Dictionary& dict, const EdmdOptions& options = {});

}  // namespace kdde
