#include "kdde/edmd.hpp"

#include <Eigen/SVD>

#include "kdde/error.hpp"

namespace kdde {

EdmdSolution edmd_solve(const Matrix& lifted_current, const Matrix& lifted_next, double rcond) {
  if (lifted_current.rows() == 0) throw Error(ErrorCode::EmptyDataset, "no samples to fit");
  if (lifted_current.rows() != lifted_next.rows() || lifted_current.cols() != lifted_next.cols())
    throw Error(ErrorCode::DimensionMismatch, "lifted current and next matrices differ in shape");
  if (!(rcond >= 0.0)) throw Error(ErrorCode::SpecError, "rcond must be nonnegative");

  // Rows are samples: Z_cur A^T ~= Z_next, so A^T = pinv(Z_cur) Z_next.
  Eigen::BDCSVD<Matrix> svd(lifted_current, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  EdmdSolution out;
  out.sigma_max = sigma.size() ? sigma(0) : 0.0;
  const double cutoff = rcond * out.sigma_max;
  Vector inv = Vector::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) {
      inv(i) = 1.0 / sigma(i);
      ++out.rank;
      out.sigma_min_kept = sigma(i);
    }
  }
  const Matrix projected = svd.matrixU().transpose() * lifted_next;  // r x m
  out.A = (svd.matrixV() * inv.asDiagonal() * projected).transpose();
  return out;
}

KoopmanModel fit_edmd(const TransitionDataset& data, const Dictionary& dict, const EdmdOptions& options) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "dataset has no samples");
  data.validate();
  if (data.dim() != dict.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(data.dim()) +
                                                  " state variables, dictionary expects " +
                                                  std::to_string(dict.input_dim()));
  EdmdSolution sol = edmd_solve(dict.lift_rows(data.current), dict.lift_rows(data.next), options.rcond);
  KoopmanModel model{dict, std::move(sol.A), FitMethod::EDMD, std::nullopt, nlohmann::json::object()};
  model.meta = {{"samples", data.size()},
                {"rcond", options.rcond},
                {"rank", sol.rank},
                {"lifted_data_condition", sol.sigma_min_kept > 0 ? sol.sigma_max / sol.sigma_min_kept : 0.0},
                {"dataset", data.provenance}};
  return model;
}

}  // namespace kdde
