#include "cvc/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvc/error.hpp"

namespace cvc {

CensoringCdf::CensoringCdf(std::vector<double> jump_times,
                           std::vector<double> cdf_values, double cap)
    : jumps_(std::move(jump_times)), values_(std::move(cdf_values)), cap_(cap) {
  if (!(cap_ > 0.0 && cap_ < 1.0)) throw InputError("invalid cap");
  if (jumps_.size() != values_.size())
    throw InputError("censoring CDF: jump_times and cdf_values differ in length");
  for (std::size_t k = 0; k < jumps_.size(); ++k) {
    if (!std::isfinite(jumps_[k]))
      throw InputError("censoring CDF: non-finite jump time");
    if (k > 0 && !(jumps_[k] > jumps_[k - 1]))
      throw InputError("censoring CDF: jump times must be strictly increasing");
    if (k > 0 && values_[k] < values_[k - 1])
      throw InputError("censoring CDF: values must be non-decreasing");
    if (!(values_[k] >= 0.0)) throw InputError("censoring CDF: negative value");
    values_[k] = std::min(values_[k], cap_);
  }

  const std::size_t n = jumps_.size();
  odds_.resize(n);
  prefix1_.assign(n, 0.0);
  prefix2_.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) odds_[k] = values_[k] / (1.0 - values_[k]);
  for (std::size_t k = 1; k < n; ++k) {
    const double s = jumps_[k - 1], e = jumps_[k];
    prefix1_[k] = prefix1_[k - 1] + odds_[k - 1] * (e - s);
    prefix2_[k] = prefix2_[k - 1] + odds_[k - 1] * (e * e - s * s);
  }
}

double CensoringCdf::operator()(double t) const {
  auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t);
  if (it == jumps_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - jumps_.begin()) - 1];
}

double CensoringCdf::odds_integral(double u) const {
  auto it = std::upper_bound(jumps_.begin(), jumps_.end(), u);
  if (it == jumps_.begin()) return 0.0;
  const auto k = static_cast<std::size_t>(it - jumps_.begin()) - 1;
  return prefix1_[k] + odds_[k] * (u - jumps_[k]);
}

double CensoringCdf::weighted_odds_integral(double u) const {
  auto it = std::upper_bound(jumps_.begin(), jumps_.end(), u);
  if (it == jumps_.begin()) return 0.0;
  const auto k = static_cast<std::size_t>(it - jumps_.begin()) - 1;
  const double s = jumps_[k];
  return prefix2_[k] + odds_[k] * (u * u - s * s);
}

double default_cdf_cap(std::size_t n) {
  return 1.0 - 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(n, 1)));
}

CensoringCdf fit_censoring_cdf(std::span<const CensoredSample> samples, double cap) {
  if (samples.empty()) throw InputError("no samples");
  if (!(cap > 0.0 && cap < 1.0)) throw InputError("invalid cap");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].u < samples[b].u;
  });

  std::vector<double> jumps, values;
  double cdf = 0.0;
  std::size_t at_risk = samples.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = samples[order[i]].u;
    if (!std::isfinite(t)) throw InputError("non-finite observed time");
    std::size_t observed = 0, censored = 0;
    while (i < order.size() && samples[order[i]].u == t) {
      (samples[order[i]].event ? observed : censored) += 1;
      ++i;
    }
    // Observed events at t leave the risk set first.
    at_risk -= observed;
    if (censored > 0) {
      cdf += (1.0 - cdf) * (static_cast<double>(censored) / static_cast<double>(at_risk));
      jumps.push_back(t);
      values.push_back(std::min(cdf, cap));
    }
    at_risk -= censored;
  }
  return CensoringCdf(std::move(jumps), std::move(values), cap);
}

double synthetic_first(double u, const CensoringCdf& g) {
  return u + g.odds_integral(u);
}

double synthetic_second(double u, const CensoringCdf& g) {
  return u * u + g.weighted_odds_integral(u);
}

SyntheticDecomposition build_synthetic(std::span<const CensoredSample> samples,
                                       const CensoringCdf& g) {
  if (samples.empty()) throw InputError("no samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  SyntheticDecomposition out;
  out.y1.resize(n);
  out.y2.resize(n);
  out.d.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = samples[static_cast<std::size_t>(i)].u;
    if (!std::isfinite(u)) throw InputError("non-finite observed time");
    out.y1[i] = synthetic_first(u, g);
    out.y2[i] = synthetic_second(u, g);
    out.d[i] = out.y2[i] - out.y1[i] * out.y1[i];
  }
  return out;
}

SyntheticDecomposition raw_moments(const Eigen::VectorXd& y) {
  SyntheticDecomposition out;
  out.y1 = y;
  out.y2 = y.array().square();
  out.d = Eigen::VectorXd::Zero(y.size());
  return out;
}

double censoring_rate(std::span<const CensoredSample> samples) {
  if (samples.empty()) return 0.0;
  const auto censored = std::count_if(samples.begin(), samples.end(),
                                      [](const CensoredSample& s) { return !s.event; });
  return static_cast<double>(censored) / static_cast<double>(samples.size());
}

}  // namespace cvc
