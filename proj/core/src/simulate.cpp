#include "cvc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/extreme_value_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "cvc/error.hpp"

namespace cvc {

namespace {

constexpr std::size_t kSimBlock = 128;

enum StreamTag : std::uint32_t {
  kMafStream = 1,
  kGenotypeStream,
  kCovariateStream,
  kSigmaStream,
  kBetaStream,
  kAlphaStream,
  kNoiseStream,
  kCausalStream,
  kCensorStream,
};

boost::random::mt19937_64 substream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return boost::random::mt19937_64(seq);
}

// Runs fn(i) for i in [0, count) on up to `threads` threads.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<double> simulate_maf(std::size_t m, std::uint64_t seed) {
  auto rng = substream(seed, kMafStream);
  boost::random::beta_distribution<double> beta(0.2, 0.8);
  std::vector<double> f(m);
  for (auto& v : f) v = 0.01 + 0.49 * beta(rng);
  return f;
}

std::vector<double> generate_genotypes(const GenotypeSimConfig& cfg, const DosageSink& sink,
                                       const LatentObserver& observer) {
  if (cfg.n < 1 || cfg.m < 1) throw InputError("simulation needs n >= 1 and m >= 1");
  if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw InputError("rho must lie in [0, 1)");

  const std::vector<double> maf = simulate_maf(cfg.m, cfg.seed);
  const boost::math::normal_distribution<double> std_normal;
  std::vector<double> tau(cfg.m);
  for (std::size_t j = 0; j < cfg.m; ++j) tau[j] = boost::math::quantile(std_normal, maf[j]);

  const auto n = static_cast<Eigen::Index>(cfg.n);
  const double rho = cfg.rho;
  const double innov = std::sqrt(1.0 - rho * rho);
  const std::size_t n_blocks = (cfg.m + kSimBlock - 1) / kSimBlock;
  const std::size_t wave = static_cast<std::size_t>(std::max(1, cfg.threads)) * 2;

  struct Local {
    Eigen::MatrixXd h1, h2;
  };
  Eigen::VectorXd carry1 = Eigen::VectorXd::Zero(n), carry2 = Eigen::VectorXd::Zero(n);
  DosageMatrix dos;

  for (std::size_t first = 0; first < n_blocks; first += wave) {
    const std::size_t count = std::min(wave, n_blocks - first);
    std::vector<Local> local(count);

    // Block-local chains started from zero; the carried state is added below.
    parallel_for(count, cfg.threads, [&](std::size_t slot) {
      const std::size_t blk = first + slot;
      const std::size_t begin = blk * kSimBlock;
      const auto w = static_cast<Eigen::Index>(std::min(kSimBlock, cfg.m - begin));
      auto rng = substream(cfg.seed, kGenotypeStream, blk);
      boost::random::normal_distribution<double> normal;
      Local& out = local[slot];
      out.h1.resize(n, w);
      out.h2.resize(n, w);
      for (Eigen::Index c = 0; c < w; ++c) {
        for (Eigen::MatrixXd* h : {&out.h1, &out.h2}) {
          double* col = h->col(c).data();
          const double* prev = c > 0 ? h->col(c - 1).data() : nullptr;
          const double scale = (blk == 0 && c == 0) ? 1.0 : innov;
          for (Eigen::Index i = 0; i < n; ++i) {
            col[i] = (prev ? rho * prev[i] : 0.0) + scale * normal(rng);
          }
        }
      }
    });

    for (std::size_t slot = 0; slot < count; ++slot) {
      const std::size_t begin = (first + slot) * kSimBlock;
      Local& blk = local[slot];
      const Eigen::Index w = blk.h1.cols();
      if (first + slot > 0 && rho > 0.0) {
        double decay = rho;
        for (Eigen::Index c = 0; c < w; ++c, decay *= rho) {
          if (decay == 0.0) break;
          blk.h1.col(c) += decay * carry1;
          blk.h2.col(c) += decay * carry2;
        }
      }
      carry1 = blk.h1.col(w - 1);
      carry2 = blk.h2.col(w - 1);
      if (observer) observer(begin, blk.h1, blk.h2);

      dos.resize(n, w);
      for (Eigen::Index c = 0; c < w; ++c) {
        const double t = tau[begin + static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < n; ++i) {
          dos(i, c) = static_cast<std::int8_t>((blk.h1(i, c) < t) + (blk.h2(i, c) < t));
        }
      }
      if (sink) sink(begin, dos);
    }
  }
  return maf;
}

SimulatedGenotypes write_simulated_genotypes(const GenotypeSimConfig& cfg, const BedPaths& out) {
  SimulatedGenotypes sim;
  sim.paths = out;
  sim.subject_ids.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) sim.subject_ids.push_back("s" + std::to_string(i + 1));
  BedWriter writer(out, sim.subject_ids);
  sim.maf = generate_genotypes(cfg, [&](std::size_t begin, const DosageMatrix& dos) {
    for (Eigen::Index c = 0; c < dos.cols(); ++c) {
      const std::size_t j = begin + static_cast<std::size_t>(c);
      writer.write_snp("snp" + std::to_string(j + 1),
                       std::span<const std::int8_t>(dos.col(c).data(), static_cast<std::size_t>(dos.rows())),
                       "1", static_cast<std::int64_t>(j + 1));
    }
  });
  writer.close();
  return sim;
}

Eigen::MatrixXd simulate_covariates(std::size_t n, std::size_t count, std::uint64_t seed) {
  auto rng = substream(seed, kCovariateStream);
  boost::random::normal_distribution<double> normal;
  Eigen::MatrixXd w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, c) = normal(rng);
  }
  return w;
}

SimulatedPhenotype simulate_phenotypes(const GenotypeSource& src, const Eigen::MatrixXd& w,
                                       const ArchitectureSpec& spec, std::uint64_t seed,
                                       std::span<const double> maf, std::span<const double> ldak) {
  const auto n = static_cast<Eigen::Index>(src.n_subjects());
  const std::size_t m = src.n_snps();
  if (w.rows() != n) throw InputError("covariate rows differ from subject count");
  if (!(spec.h2_target > 0.0 && spec.h2_target < 1.0)) throw InputError("h2 target must lie in (0, 1)");

  const int k = src.n_partitions();
  std::vector<double> var(m, 0.0);
  SimulatedPhenotype out;
  out.sigma_k = Eigen::VectorXd::Zero(k);

  if (spec.mode == ArchitectureMode::correct) {
    auto rng = substream(seed, kSigmaStream);
    boost::random::uniform_01<double> unif;
    for (int kk = 0; kk < k; ++kk) out.sigma_k(kk) = unif(rng);
    const auto sizes = src.partition_sizes();
    for (std::size_t j = 0; j < m; ++j) {
      const int p = src.snps()[j].partition;
      var[j] = out.sigma_k(p) / static_cast<double>(sizes[static_cast<std::size_t>(p)]);
    }
    out.n_causal = m;
  } else {
    if (!(spec.cvr > 0.0 && spec.cvr <= 1.0)) throw InputError("causal variant rate must lie in (0, 1]");
    std::vector<double> f(m), lw(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) f[j] = maf.empty() ? src.snps()[j].maf() : maf[j];
    if (!maf.empty() && maf.size() != m) throw InputError("maf length differs from SNP count");
    if (!ldak.empty()) {
      if (ldak.size() != m) throw InputError("ldak length differs from SNP count");
      std::copy(ldak.begin(), ldak.end(), lw.begin());
    }
    std::vector<std::size_t> window;
    for (std::size_t j = 0; j < m; ++j) {
      if (f[j] >= spec.causal_maf_low && f[j] <= spec.causal_maf_high) window.push_back(j);
    }
    if (window.empty()) throw InputError("no causal SNPs in MAF window");
    const std::size_t n_causal = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.cvr * static_cast<double>(window.size()))));
    auto rng = substream(seed, kCausalStream);
    for (std::size_t i = 0; i < n_causal; ++i) {
      boost::random::uniform_int_distribution<std::size_t> pick(i, window.size() - 1);
      std::swap(window[i], window[pick(rng)]);
    }
    for (std::size_t i = 0; i < n_causal; ++i) {
      const std::size_t j = window[i];
      var[j] = std::pow(lw[j], spec.b_coupling) * std::pow(f[j] * (1.0 - f[j]), spec.a);
      out.sigma_k(src.snps()[j].partition) += var[j];
    }
    out.n_causal = n_causal;
  }

  out.sigma_g = out.sigma_k.sum();
  if (!(out.sigma_g > 0.0)) throw InputError("architecture has zero genetic variance");
  out.sigma_e = (1.0 / spec.h2_target - 1.0) * out.sigma_g;
  out.h2 = spec.h2_target;

  Eigen::VectorXd beta(static_cast<Eigen::Index>(m));
  {
    auto rng = substream(seed, kBetaStream);
    boost::random::normal_distribution<double> normal;
    for (std::size_t j = 0; j < m; ++j) beta(static_cast<Eigen::Index>(j)) = std::sqrt(var[j]) * normal(rng);
  }
  out.genetic = Eigen::VectorXd::Zero(n);
  src.stream_blocks([&](const GenotypeBlock& blk) {
    out.genetic.noalias() +=
        blk.x * beta.segment(static_cast<Eigen::Index>(blk.begin), blk.x.cols());
  });

  {
    auto rng = substream(seed, kAlphaStream);
    boost::random::uniform_01<double> unif;
    Eigen::VectorXd alpha(w.cols() + 1);
    for (Eigen::Index c = 0; c < alpha.size(); ++c) alpha(c) = unif(rng);
    out.fixed = Eigen::VectorXd::Constant(n, alpha(0));
    if (w.cols() > 0) out.fixed += w * alpha.tail(w.cols());
  }

  out.noise.resize(n);
  {
    auto rng = substream(seed, kNoiseStream);
    const double sd = std::sqrt(out.sigma_e);
    if (spec.error_law == ErrorLaw::normal) {
      boost::random::normal_distribution<double> normal(0.0, sd);
      for (Eigen::Index i = 0; i < n; ++i) out.noise(i) = normal(rng);
    } else {
      const double scale = sd * std::sqrt(6.0) / boost::math::constants::pi<double>();
      const double loc = -scale * boost::math::constants::euler<double>();
      boost::random::extreme_value_distribution<double> gumbel(loc, scale);
      for (Eigen::Index i = 0; i < n; ++i) out.noise(i) = gumbel(rng);
    }
  }
  out.y = out.fixed + out.genetic + out.noise;
  return out;
}

CensoredData calibrate_censoring(const Eigen::VectorXd& y, double target_rate, double sigma_c,
                                 std::span<const double> xi) {
  const auto n = static_cast<std::size_t>(y.size());
  if (n == 0) throw InputError("no samples");
  if (!(target_rate >= 0.0 && target_rate < 1.0)) throw InputError("censoring rate must lie in [0, 1)");
  if (!(sigma_c > 0.0) || !std::isfinite(sigma_c)) throw InputError("censoring scale must be positive");
  if (xi.size() != n) throw InputError("xi length differs from y");
  if (!y.allFinite()) throw InputError("non-finite trait value");

  CensoredData out;
  out.spec.target_rate = target_rate;
  out.spec.sigma_c = sigma_c;
  out.samples.resize(n);

  if (target_rate == 0.0) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = {y(static_cast<Eigen::Index>(i)), true};
    return out;
  }

  auto fraction = [&](double mu) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += y(static_cast<Eigen::Index>(i)) > mu + sigma_c * xi[i];
    return static_cast<double>(c) / static_cast<double>(n);
  };

  double lo = y.minCoeff() - 10.0 * sigma_c;
  double hi = y.maxCoeff() + 10.0 * sigma_c;
  double step = hi - lo;
  while (fraction(lo) <= target_rate) {
    lo -= step;
    step *= 2.0;
  }
  step = hi - lo;
  while (fraction(hi) > target_rate) {
    hi += step;
    step *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (fraction(mid) <= target_rate ? hi : lo) = mid;
  }

  out.spec.mu_c = hi;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y(static_cast<Eigen::Index>(i));
    const double ri = hi + sigma_c * xi[i];
    const bool event = yi <= ri;
    out.samples[i] = {event ? yi : ri, event};
    censored += !event;
  }
  out.realized_rate = static_cast<double>(censored) / static_cast<double>(n);
  return out;
}

CensoredData calibrate_censoring(const Eigen::VectorXd& y, double target_rate, double sigma_c,
                                 std::uint64_t seed) {
  auto rng = substream(seed, kCensorStream);
  boost::random::normal_distribution<double> normal;
  std::vector<double> xi(static_cast<std::size_t>(y.size()));
  for (auto& v : xi) v = normal(rng);
  return calibrate_censoring(y, target_rate, sigma_c, xi);
}

}  // namespace cvc
