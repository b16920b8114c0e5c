#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "cvc/moments.hpp"

namespace cvc {

inline constexpr double kMaxConditionNumber = 1e12;

/// Unconstrained variance components; entries may be negative.
struct VarianceComponents {
  Eigen::VectorXd sigma_g;  // K
  double sigma_e = 0.0;

  double total() const { return sigma_g.sum() + sigma_e; }
};

struct ComponentFit {
  VarianceComponents full;
  std::vector<VarianceComponents> variants;  // one per jackknife block
  double condition_number = 0.0;             // of the full system
};

/// Symmetric indefinite (Bunch-Kaufman) solve of one system. Throws
/// NumericalError when the 2-norm condition number exceeds
/// kMaxConditionNumber.
VarianceComponents solve_system(const LinearSystem& ls, double* condition_number = nullptr);

ComponentFit solve_components(const NormalEquationSystem& sys);

struct HeritabilityReport {
  double h2_total = 0.0;
  Eigen::VectorXd h2_partition;
  double se_total = 0.0;
  Eigen::VectorXd se_partition;
  Eigen::MatrixXd jackknife_estimates;  // J x (K+1): h2_1 .. h2_K, total
  VarianceComponents components;
  double condition_number = 0.0;

  int k() const { return static_cast<int>(h2_partition.size()); }
};

/// sqrt((J-1)/J * sum_j (x_j - mean)^2); zero for fewer than two replicates.
double jackknife_se(std::span<const double> replicates);

/// Heritability ratios and their jackknife SEs. `zero_tol` is the magnitude
/// at or below which the total variance counts as zero.
HeritabilityReport to_heritability(const ComponentFit& fit, double zero_tol = 0.0);

/// Observed-scale to liability-scale factor Delta(1-Delta) / phi(Phi^-1(Delta))^2.
double lt_factor(double censoring_rate);

double lt_convert(double h2_binary, double censoring_rate);

/// Scales every estimate, replicate and SE of a report by lt_factor.
HeritabilityReport lt_convert(const HeritabilityReport& report, double censoring_rate);

}  // namespace cvc
