#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cvc/censoring.hpp"

namespace cvc {

namespace fs = std::filesystem;

/// Tab-separated `id time status`; time > 0 on the original scale unless
/// `pre_logged`, status 1 = event, 0 = censored. Samples carry log time.
struct PhenotypeTable {
  std::vector<std::string> ids;
  std::vector<CensoredSample> samples;
};

PhenotypeTable read_phenotypes(const fs::path& path, bool pre_logged = false);
void write_phenotypes(const fs::path& path, std::span<const std::string> ids,
                      std::span<const CensoredSample> samples, bool pre_logged = false);

/// Tab-separated `id` plus numeric columns.
struct CovariateTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows follow ids
};

CovariateTable read_covariates(const fs::path& path);
void write_covariates(const fs::path& path, std::span<const std::string> ids,
                      const Eigen::MatrixXd& values);

/// Per-SNP annotations: `id partition` (explicit) or `id maf ldak` (grid).
struct AnnotationTable {
  bool has_partition = false;
  bool has_grid = false;
  std::vector<std::string> ids;
  std::vector<int> partition;
  std::vector<double> maf;
  std::vector<double> ldak;
};

AnnotationTable read_annotations(const fs::path& path);
void write_annotations(const fs::path& path, std::span<const std::string> ids,
                       std::span<const double> maf, std::span<const double> ldak);

}  // namespace cvc
