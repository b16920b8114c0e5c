#include "cvc/projection.hpp"

#include <Eigen/SVD>

#include "cvc/error.hpp"

namespace cvc {

CovariateBasis build_basis(const Eigen::MatrixXd& w, double rank_tol) {
  if (w.rows() < 1 || w.cols() < 1) throw InputError("covariate matrix is empty");
  if (!w.allFinite()) throw InputError("covariate matrix has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) throw InputError("covariate matrix has rank 0");
  Eigen::Index r = 0;
  while (r < s.size() && s[r] > rank_tol * s[0]) ++r;
  return CovariateBasis(svd.matrixU().leftCols(r), w.cols());
}

Eigen::MatrixXd project_onto(const CovariateBasis& basis, const Eigen::MatrixXd& v) {
  if (v.rows() != basis.n()) throw InputError("project_onto: row count does not match basis");
  if (basis.rank() == 0) return Eigen::MatrixXd::Zero(v.rows(), v.cols());
  return basis.h() * (basis.h().transpose() * v);
}

Eigen::MatrixXd project_out(const CovariateBasis& basis, const Eigen::MatrixXd& v) {
  if (v.rows() != basis.n()) throw InputError("project_out: row count does not match basis");
  if (basis.rank() == 0) return v;
  return v - basis.h() * (basis.h().transpose() * v);
}

Eigen::VectorXd project_out(const CovariateBasis& basis, const Eigen::VectorXd& v) {
  if (v.rows() != basis.n()) throw InputError("project_out: row count does not match basis");
  if (basis.rank() == 0) return v;
  return v - basis.h() * (basis.h().transpose() * v);
}

}  // namespace cvc
