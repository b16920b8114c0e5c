#pragma once

#include <Eigen/Core>

namespace cvc {

/// Orthonormal basis H of the covariate column space. The fixed-effect
/// projector is P = H H^T and its complement V = I - P; neither is formed.
class CovariateBasis {
 public:
  CovariateBasis() = default;
  CovariateBasis(Eigen::MatrixXd h, Eigen::Index n_covariates)
      : h_(std::move(h)), n_covariates_(n_covariates) {}

  /// Empty basis (V = I) for n subjects.
  static CovariateBasis none(Eigen::Index n) { return {Eigen::MatrixXd(n, 0), 0}; }

  const Eigen::MatrixXd& h() const { return h_; }
  Eigen::Index rank() const { return h_.cols(); }
  Eigen::Index n() const { return h_.rows(); }
  Eigen::Index n_covariates() const { return n_covariates_; }

  /// Squared row norms of H, i.e. diag(P).
  Eigen::VectorXd leverages() const { return h_.rowwise().squaredNorm(); }

 private:
  Eigen::MatrixXd h_;
  Eigen::Index n_covariates_ = 0;
};

inline constexpr double kDefaultRankTol = 1e-10;

/// Left singular vectors of W whose singular values exceed
/// rank_tol * sigma_max.
CovariateBasis build_basis(const Eigen::MatrixXd& w, double rank_tol = kDefaultRankTol);

/// H (H^T v)
Eigen::MatrixXd project_onto(const CovariateBasis& basis, const Eigen::MatrixXd& v);

/// v - H (H^T v)
Eigen::MatrixXd project_out(const CovariateBasis& basis, const Eigen::MatrixXd& v);
Eigen::VectorXd project_out(const CovariateBasis& basis, const Eigen::VectorXd& v);

}  // namespace cvc
