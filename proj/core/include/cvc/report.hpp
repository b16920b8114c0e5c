#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvc/censoring.hpp"
#include "cvc/pipeline.hpp"

namespace cvc {

inline constexpr int kReportSchemaVersion = 1;

struct RunMetadata {
  std::string command;
  std::uint64_t seed = 0;
  int probes = 0;
  int jackknife_blocks = 0;
  std::string jackknife_mode;
  bool exact_trace = false;
  int threads = 1;
  bool strict_deterministic = true;
  std::vector<std::pair<std::string, std::string>> inputs;  // role -> path
};

/// JSON report (deterministic: no timestamps, fixed key order).
/// `partition_labels` maps each fitted partition to its input label; empty
/// means 0..K-1.
std::string report_json(const FitResult& fit, const RunMetadata& meta,
                        const std::vector<int>& partition_labels = {},
                        const AlignmentSummary* alignment = nullptr);

/// `partition  h2  se` rows, one per partition and a final `total` row.
std::string report_tsv(const FitResult& fit, const std::vector<int>& partition_labels = {});

/// `time  cdf` rows of the censoring CDF jump points.
std::string cdf_tsv(const CensoringCdf& cdf);

/// Writes text to a file, replacing it only once the full content is on disk.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cvc
