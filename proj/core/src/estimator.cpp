#include "cvc/estimator.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/SVD>
#include <boost/math/distributions/normal.hpp>
#include <lapacke.h>

#include "cvc/error.hpp"

namespace cvc {

VarianceComponents solve_system(const LinearSystem& ls, double* condition_number) {
  const Eigen::Index p = ls.lhs.rows();
  if (p < 2 || ls.lhs.cols() != p || ls.rhs.size() != p) {
    throw InputError("normal equations have inconsistent shape");
  }
  if (!ls.lhs.allFinite() || !ls.rhs.allFinite()) {
    throw NumericalError("normal equations contain non-finite entries");
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(ls.lhs);
  const auto& sv = svd.singularValues();
  const double cond = sv(p - 1) > 0.0 ? sv(0) / sv(p - 1) : INFINITY;
  if (condition_number) *condition_number = cond;
  if (!(cond <= kMaxConditionNumber)) {
    throw NumericalError("ill-conditioned normal equations (collinear GRMs?)");
  }

  Eigen::MatrixXd a = ls.lhs;
  Eigen::VectorXd x = ls.rhs;
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(p));
  const lapack_int n = static_cast<lapack_int>(p);
  const lapack_int info =
      LAPACKE_dsysv(LAPACK_COL_MAJOR, 'U', n, 1, a.data(), n, ipiv.data(), x.data(), n);
  if (info != 0) {
    throw NumericalError("symmetric solve failed (info " + std::to_string(info) + ")");
  }

  VarianceComponents vc;
  vc.sigma_g = x.head(p - 1);
  vc.sigma_e = x(p - 1);
  return vc;
}

ComponentFit solve_components(const NormalEquationSystem& sys) {
  ComponentFit fit;
  fit.full = solve_system(sys.full, &fit.condition_number);
  fit.variants.reserve(sys.variants.size());
  for (const auto& v : sys.variants) fit.variants.push_back(solve_system(v));
  return fit;
}

double jackknife_se(std::span<const double> replicates) {
  const auto j = static_cast<double>(replicates.size());
  if (replicates.size() < 2) return 0.0;
  const double mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / j;
  double ss = 0.0;
  for (double x : replicates) ss += (x - mean) * (x - mean);
  return std::sqrt((j - 1.0) / j * ss);
}

namespace {

Eigen::VectorXd ratios(const VarianceComponents& vc, double zero_tol) {
  const double total = vc.total();
  if (!std::isfinite(total) || std::abs(total) <= zero_tol) {
    throw NumericalError("degenerate total variance");
  }
  Eigen::VectorXd out(vc.sigma_g.size() + 1);
  out.head(vc.sigma_g.size()) = vc.sigma_g / total;
  out(vc.sigma_g.size()) = vc.sigma_g.sum() / total;
  return out;
}

}  // namespace

HeritabilityReport to_heritability(const ComponentFit& fit, double zero_tol) {
  const Eigen::Index k = fit.full.sigma_g.size();
  HeritabilityReport rep;
  rep.components = fit.full;
  rep.condition_number = fit.condition_number;

  const Eigen::VectorXd h = ratios(fit.full, zero_tol);
  rep.h2_partition = h.head(k);
  rep.h2_total = h(k);

  const auto j = static_cast<Eigen::Index>(fit.variants.size());
  rep.jackknife_estimates.resize(j, k + 1);
  for (Eigen::Index r = 0; r < j; ++r) {
    rep.jackknife_estimates.row(r) = ratios(fit.variants[static_cast<std::size_t>(r)], zero_tol).transpose();
  }
  rep.se_partition.resize(k);
  std::vector<double> col(static_cast<std::size_t>(j));
  for (Eigen::Index c = 0; c <= k; ++c) {
    for (Eigen::Index r = 0; r < j; ++r) col[static_cast<std::size_t>(r)] = rep.jackknife_estimates(r, c);
    const double se = jackknife_se(col);
    if (c < k) {
      rep.se_partition(c) = se;
    } else {
      rep.se_total = se;
    }
  }
  return rep;
}

double lt_factor(double censoring_rate) {
  if (!(censoring_rate > 0.0 && censoring_rate < 1.0)) {
    throw InputError("liability conversion needs a censoring rate in (0, 1)");
  }
  const boost::math::normal_distribution<double> std_normal;
  const double z = boost::math::quantile(std_normal, censoring_rate);
  const double phi = boost::math::pdf(std_normal, z);
  return censoring_rate * (1.0 - censoring_rate) / (phi * phi);
}

double lt_convert(double h2_binary, double censoring_rate) {
  return lt_factor(censoring_rate) * h2_binary;
}

HeritabilityReport lt_convert(const HeritabilityReport& report, double censoring_rate) {
  const double f = lt_factor(censoring_rate);
  HeritabilityReport out = report;
  out.h2_total *= f;
  out.h2_partition *= f;
  out.se_total *= f;
  out.se_partition *= f;
  out.jackknife_estimates *= f;
  return out;
}

}  // namespace cvc
