#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cvc/censoring.hpp"
#include "cvc/estimator.hpp"
#include "cvc/genotype.hpp"
#include "cvc/moments.hpp"
#include "cvc/scratch.hpp"

namespace cvc {

namespace fs = std::filesystem;

struct FitOptions {
  int probes = kDefaultProbes;
  int jackknife_blocks = kDefaultJackknifeBlocks;
  JackknifeMode jackknife_mode = JackknifeMode::within_partition;
  std::uint64_t seed = 1;
  bool exact_trace = false;
  int threads = 1;
  bool strict_deterministic = true;
  ScratchOptions scratch;
  bool force_spill = false;
  std::optional<double> cdf_cap;  // default 1 - 1/(2N)
  double rank_tol = kDefaultRankTol;
};

struct FitResult {
  std::string method;  // "cvc" or "lt"
  HeritabilityReport report;
  NormalEquationSystem system;
  CensoringCdf cdf;
  double censoring_rate = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  int k = 0;
  int j = 0;
  Eigen::Index rank = 0;
  bool spilled = false;
  IoStats io;
};

/// Full estimate on aligned inputs. `src` carries the partitions; jackknife
/// blocks are assigned here. `w` holds every fixed-effect column, intercept
/// included (zero columns means no fixed effects).
FitResult fit_cvc(const GenotypeSource& src, std::span<const CensoredSample> samples,
                  const Eigen::MatrixXd& w, const FitOptions& opts = {});

/// Same pipeline on the censoring indicator as a quantitative trait, followed
/// by liability-scale conversion at the observed censoring rate.
FitResult fit_lt(const GenotypeSource& src, std::span<const CensoredSample> samples,
                 const Eigen::MatrixXd& w, const FitOptions& opts = {});

/// Moment system for an arbitrary decomposition; shared by both fits.
NormalEquationSystem build_system(const GenotypeSource& src, const SyntheticDecomposition& syn,
                                  const CovariateBasis& basis, const FitOptions& opts,
                                  bool* spilled = nullptr);

/// Jackknife assignment with the per-partition size check applied up front.
GenotypeSource with_jackknife(const GenotypeSource& src, int blocks, JackknifeMode mode);

/// Drops partitions without SNPs and renumbers the rest; `labels` receives
/// the original label of each retained partition.
GenotypeSource compact_partitions(const GenotypeSource& src, std::vector<int>& labels);

// --- file-level loading ---

enum class PartitionSource { single, contiguous, annotation };

struct DatasetSpec {
  BedPaths genotypes;
  fs::path phenotype;
  std::optional<fs::path> covariates;
  std::optional<fs::path> annotations;
  bool pre_logged = false;
  PartitionSource partitions = PartitionSource::single;
  int contiguous_k = 1;
  PartitionScheme grid;  // knots and quantiles for grid annotations
  std::size_t block_width = 512;
};

struct AlignmentSummary {
  std::size_t phenotype_rows = 0;
  std::size_t covariate_rows = 0;
  std::size_t genotype_subjects = 0;
  std::size_t subjects_used = 0;
  std::size_t subjects_dropped = 0;  // phenotype or covariate ids outside the intersection
  std::size_t snps_in_file = 0;
  std::vector<std::string> dropped_snps;
  int partitions_requested = 0;
  std::vector<int> empty_partitions;  // original labels
  std::vector<std::string> warnings;
};

struct Dataset {
  GenotypeSource src;
  std::vector<std::string> ids;
  std::vector<CensoredSample> samples;
  Eigen::MatrixXd w;  // intercept first
  std::vector<std::string> covariate_names;
  std::vector<int> partition_labels;  // original label per partition
  AlignmentSummary summary;
};

/// Reads every input, keeps the subjects present in all files (genotype-file
/// order) and assigns partitions.
Dataset load_dataset(const DatasetSpec& spec);

struct Footprint {
  std::size_t ram_bytes = 0;
  std::size_t scratch_bytes = 0;
};

/// Approximate peak memory of one estimate and the part spilled to disk.
Footprint estimate_footprint(std::size_t n, std::size_t m, int k, int j, int b,
                             std::size_t block_width, std::size_t memory_budget);

}  // namespace cvc
