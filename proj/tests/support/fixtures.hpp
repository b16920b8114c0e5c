#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvc/censoring.hpp"
#include "cvc/genotype.hpp"

namespace cvc::testing {

namespace fs = std::filesystem;

using Dosages = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cvc-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Writes dosages (N x M, kMissingDosage for missing) as a bed triplet with
/// subject ids i1..iN and SNP ids v1..vM.
BedPaths write_bed(const fs::path& dir, const std::string& name, const Dosages& dosages);

/// Random dosages with per-SNP frequencies in [0.05, 0.5]; every column is
/// polymorphic.
Dosages random_dosages(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng,
                       double missing_rate = 0.0);

/// Textbook standardization: mean over observed calls, missing set to the
/// mean, divided by the population sd of the imputed column.
Eigen::MatrixXd standardize(const Dosages& dosages);

/// Orthogonal projector onto the column space of w via a pseudo-inverse.
Eigen::MatrixXd dense_projector(const Eigen::MatrixXd& w);

/// Y* = diag(y2) off-diagonal y1 y1^T.
Eigen::MatrixXd dense_synthetic(const SyntheticDecomposition& syn);

/// Least-squares fit of vec(V Y V) on {vec(V K_k V)} and vec(V) by QR, where
/// K_k = X_k X_k^T / M_k over the columns labelled k.
Eigen::VectorXd dense_least_squares(const Eigen::MatrixXd& x, const std::vector<int>& partitions,
                                    int k, const Eigen::MatrixXd& w, const Eigen::MatrixXd& y);

/// Dense (K+1) x (K+1) normal equations [T b; b^T N-r] and right-hand side.
struct DenseSystem {
  Eigen::MatrixXd lhs;
  Eigen::VectorXd rhs;
};
DenseSystem dense_normal_equations(const Eigen::MatrixXd& x, const std::vector<int>& partitions,
                                   int k, const Eigen::MatrixXd& w, const Eigen::MatrixXd& y);

/// Random right-censored sample on the log scale.
std::vector<CensoredSample> random_censored(Eigen::Index n, double rate, std::mt19937_64& rng);

/// Intercept plus `extra` standard normal columns.
Eigen::MatrixXd random_covariates(Eigen::Index n, Eigen::Index extra, std::mt19937_64& rng);

}  // namespace cvc::testing
