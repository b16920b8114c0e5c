#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cvc/censoring.hpp"
#include "cvc/genotype.hpp"

namespace cvc {

// --- genotypes ---

struct GenotypeSimConfig {
  std::size_t n = 0;
  std::size_t m = 0;
  double rho = 0.1;  // adjacent-SNP correlation of the latent haplotype chains
  std::uint64_t seed = 1;
  int threads = 1;
};

using DosageMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Called with the first SNP index of a block and its dosages (N x w).
using DosageSink = std::function<void(std::size_t begin, const DosageMatrix& dosages)>;

/// Called with the first SNP index of a block and the two latent Gaussian
/// haplotype chains (N x w each) before thresholding.
using LatentObserver =
    std::function<void(std::size_t begin, const Eigen::MatrixXd& hap1, const Eigen::MatrixXd& hap2)>;

/// Minor allele frequencies f = 0.01 + 0.49 Beta(0.2, 0.8).
std::vector<double> simulate_maf(std::size_t m, std::uint64_t seed);

/// Each subject carries two latent AR(rho) chains along the SNP axis; an
/// allele is minor when its latent value falls below Phi^-1(f). Dosages are
/// minor-allele counts with exact Bin(2, f) marginals. Draws come from
/// per-block substreams, so output does not depend on `threads`. Returns the
/// allele frequencies.
std::vector<double> generate_genotypes(const GenotypeSimConfig& cfg, const DosageSink& sink,
                                       const LatentObserver& observer = {});

struct SimulatedGenotypes {
  BedPaths paths;
  std::vector<std::string> subject_ids;
  std::vector<double> maf;
};

/// generate_genotypes written as a .bed/.bim/.fam triplet with the minor
/// allele as A1. Subject ids are s1..sN, SNP ids snp1..snpM.
SimulatedGenotypes write_simulated_genotypes(const GenotypeSimConfig& cfg, const BedPaths& out);

/// N x count standard normal covariates (no intercept column).
Eigen::MatrixXd simulate_covariates(std::size_t n, std::size_t count, std::uint64_t seed);

// --- phenotypes ---

enum class ArchitectureMode { correct, misspecified };
enum class ErrorLaw { normal, gumbel };

struct ArchitectureSpec {
  double h2_target = 0.5;
  ArchitectureMode mode = ArchitectureMode::correct;
  double a = 0.0;          // MAF coupling exponent
  double b_coupling = 0.0; // LDAK coupling exponent
  double cvr = 1.0;        // causal variant rate
  double causal_maf_low = 0.0;
  double causal_maf_high = 0.5;
  ErrorLaw error_law = ErrorLaw::normal;
};

struct SimulatedPhenotype {
  Eigen::VectorXd y;        // log event times
  Eigen::VectorXd genetic;  // X beta
  Eigen::VectorXd fixed;    // W alpha (with intercept)
  Eigen::VectorXd noise;
  Eigen::VectorXd sigma_k;  // true genetic variance per partition
  double sigma_g = 0.0;     // sum of genetic variances
  double sigma_e = 0.0;
  double h2 = 0.0;          // population heritability of the architecture
  std::size_t n_causal = 0;
};

/// Draws effects for the standardized genotypes of `src` and returns
/// y = [1 W] alpha + X beta + e with sigma_e^2 = (1/h2 - 1) sum sigma^2.
/// In misspecified mode `maf` and `ldak` are per-SNP (ldak may be empty,
/// meaning all ones).
SimulatedPhenotype simulate_phenotypes(const GenotypeSource& src, const Eigen::MatrixXd& w,
                                       const ArchitectureSpec& spec, std::uint64_t seed,
                                       std::span<const double> maf = {},
                                       std::span<const double> ldak = {});

// --- censoring ---

struct CensoringSpec {
  double target_rate = 0.0;
  std::optional<double> mu_c;  // empty when no censoring is applied
  double sigma_c = 1.0;
};

struct CensoredData {
  CensoringSpec spec;
  std::vector<CensoredSample> samples;
  double realized_rate = 0.0;
};

/// r_i = mu_c + sigma_c xi_i with xi fixed; mu_c is the smallest location
/// (found by bisection) at which the censored fraction is at most the target.
CensoredData calibrate_censoring(const Eigen::VectorXd& y, double target_rate, double sigma_c,
                                 std::span<const double> xi);

/// Same with xi drawn from `seed`.
CensoredData calibrate_censoring(const Eigen::VectorXd& y, double target_rate, double sigma_c,
                                 std::uint64_t seed);

}  // namespace cvc
