#include <random>

#include <gtest/gtest.h>

#include "cvc/error.hpp"
#include "cvc/projection.hpp"
#include "fixtures.hpp"

using namespace cvc;

TEST(Basis, InterceptOnly) {
  const auto basis = build_basis(Eigen::MatrixXd::Ones(9, 1));
  ASSERT_EQ(basis.rank(), 1);
  EXPECT_EQ(basis.n_covariates(), 1);
  for (Eigen::Index i = 0; i < 9; ++i) EXPECT_NEAR(std::abs(basis.h()(i, 0)), 1.0 / 3.0, 1e-14);
}

TEST(Basis, DuplicateColumnCollapses) {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd w(20, 2);
  w.col(0) = Eigen::VectorXd::Ones(20);
  w.col(1) = w.col(0);
  EXPECT_EQ(build_basis(w).rank(), 1);
  const Eigen::MatrixXd base = cvc::testing::random_covariates(20, 2, rng);
  Eigen::MatrixXd dup(20, 4);
  dup << base, base.col(1) * 2.0 - base.col(2);
  EXPECT_EQ(build_basis(dup).rank(), 3);
}

TEST(Basis, ReproducesColumnSpace) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd w = cvc::testing::random_covariates(100, 4, rng);
  const auto basis = build_basis(w);
  EXPECT_EQ(basis.rank(), 5);
  const Eigen::MatrixXd h = basis.h();
  EXPECT_LT((h.transpose() * h - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((project_onto(basis, w) - w).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(project_out(basis, w).norm(), 1e-10 * w.norm());
}

TEST(Basis, RankZero) {
  try {
    build_basis(Eigen::MatrixXd::Zero(5, 2));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "covariate matrix has rank 0");
  }
}

TEST(ProjectOut, CentersUnderIntercept) {
  const auto basis = build_basis(Eigen::MatrixXd::Ones(3, 1));
  const Eigen::VectorXd r = project_out(basis, Eigen::VectorXd(Eigen::Vector3d(1, 2, 3)));
  EXPECT_NEAR(r(0), -1.0, 1e-14);
  EXPECT_NEAR(r(1), 0.0, 1e-14);
  EXPECT_NEAR(r(2), 1.0, 1e-14);
}

TEST(ProjectOut, IdempotentSymmetricAndShapeChecked) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd w = cvc::testing::random_covariates(40, 3, rng);
  const auto basis = build_basis(w);
  Eigen::VectorXd a(40), b(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    a(i) = normal(rng);
    b(i) = normal(rng);
  }
  const Eigen::VectorXd va = project_out(basis, a);
  EXPECT_LT((project_out(basis, va) - va).norm(), 1e-10);
  EXPECT_NEAR(b.dot(va), a.dot(project_out(basis, b)), 1e-10);
  EXPECT_THROW(project_out(basis, Eigen::VectorXd(Eigen::VectorXd::Ones(39))), InputError);
}

TEST(ProjectOut, TraceIsNMinusRank) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd w = cvc::testing::random_covariates(25, 3, rng);
  const auto basis = build_basis(w);
  const Eigen::MatrixXd v = project_out(basis, Eigen::MatrixXd(Eigen::MatrixXd::Identity(25, 25)));
  EXPECT_NEAR(v.trace(), 25.0 - static_cast<double>(basis.rank()), 1e-10);
  const Eigen::MatrixXd oracle = Eigen::MatrixXd::Identity(25, 25) - cvc::testing::dense_projector(w);
  EXPECT_LT((v - oracle).cwiseAbs().maxCoeff(), 1e-10);
}
