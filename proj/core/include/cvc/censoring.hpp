#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace cvc {

/// One right-censored observation on the log-time scale.
///   u     = min(y, r), the observed log time
///   event = true when the event was observed (y <= r), false when censored
struct CensoredSample {
  double u = 0.0;
  bool event = true;
};

/// Right-continuous step estimate of the censoring-time CDF.
///
/// The value on [jump_times[k], jump_times[k+1]) is cdf_values[k]; before the
/// first jump the CDF is zero. Every stored value is clamped to `cap` < 1 so
/// that G / (1 - G) stays bounded. Prefix integrals of G/(1-G) and
/// 2t G/(1-G) are cached at the jump points so that evaluating a synthetic
/// variable costs one binary search.
class CensoringCdf {
 public:
  CensoringCdf() = default;
  CensoringCdf(std::vector<double> jump_times, std::vector<double> cdf_values,
               double cap);

  double operator()(double t) const;

  const std::vector<double>& jump_times() const { return jumps_; }
  const std::vector<double>& cdf_values() const { return values_; }
  double cap() const { return cap_; }
  bool empty() const { return jumps_.empty(); }

  /// Integral of G/(1-G) over (-inf, u).
  double odds_integral(double u) const;
  /// Integral of 2t G/(1-G) over (-inf, u).
  double weighted_odds_integral(double u) const;

 private:
  std::vector<double> jumps_;
  std::vector<double> values_;
  std::vector<double> odds_;        // G/(1-G) on each segment
  std::vector<double> prefix1_;     // integral up to jumps_[k]
  std::vector<double> prefix2_;
  double cap_ = 1.0;
};

/// 1 - 1/(2n): the default clamp applied to the Kaplan-Meier estimate.
double default_cdf_cap(std::size_t n);

/// Kaplan-Meier estimate of the censoring distribution. Censored
/// observations are the "events" of the censoring process; at tied times the
/// observed events leave the risk set before the censoring events are counted.
CensoringCdf fit_censoring_cdf(std::span<const CensoredSample> samples, double cap);

/// u + integral_{-inf}^{u} G(t) / (1 - G(t)) dt
double synthetic_first(double u, const CensoringCdf& g);

/// u^2 + integral_{-inf}^{u} 2t G(t) / (1 - G(t)) dt
double synthetic_second(double u, const CensoringCdf& g);

/// Y* = diag(d) + y1 y1^T, with d = y2 - y1^2, stored without the N x N matrix.
struct SyntheticDecomposition {
  Eigen::VectorXd y1;
  Eigen::VectorXd y2;
  Eigen::VectorXd d;

  Eigen::Index size() const { return y1.size(); }
};

SyntheticDecomposition build_synthetic(std::span<const CensoredSample> samples,
                                       const CensoringCdf& g);

/// Uncensored decomposition (y1 = y, y2 = y^2, d = 0).
SyntheticDecomposition raw_moments(const Eigen::VectorXd& y);

/// Fraction of samples that are censored.
double censoring_rate(std::span<const CensoredSample> samples);

}  // namespace cvc
