#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace cvc {

namespace fs = std::filesystem;

/// PLINK 1 binary triplet.
struct BedPaths {
  fs::path bed, bim, fam;

  static BedPaths from_prefix(const fs::path& prefix);
};

inline constexpr std::uint8_t kBedMagic[3] = {0x6C, 0x1B, 0x01};

/// Two-bit genotype codes in SNP-major .bed files, read least significant
/// pair first: 0 = hom A1, 1 = missing, 2 = het, 3 = hom A2. Dosage is the
/// A1 allele count.
inline constexpr std::int8_t kMissingDosage = -1;

struct SnpMeta {
  std::string id;
  std::string chrom;
  std::int64_t position = 0;
  std::string a1, a2;
  double mean = 0.0;  // mean A1 dosage over observed genotypes
  double std = 1.0;   // population sd of the mean-imputed column
  std::size_t n_missing = 0;
  int partition = 0;
  int jackknife_block = 0;
  std::size_t file_index = 0;  // row in the .bim file

  double maf() const;
};

struct LoadSummary {
  std::size_t subjects_in_file = 0;
  std::size_t snps_in_file = 0;
  std::vector<std::string> dropped_snps;  // monomorphic or all missing
  std::vector<std::string> warnings;
};

struct IoStats {
  std::uint64_t bytes_read = 0;
  std::uint64_t snp_reads = 0;
  std::uint64_t passes = 0;  // completed or attempted stream_blocks calls
};

/// One decoded block of standardized genotype columns.
struct GenotypeBlock {
  const Eigen::MatrixXd& x;  // N x (end - begin)
  std::size_t index = 0;     // block number in file order
  std::size_t begin = 0;     // retained-SNP index range [begin, end)
  std::size_t end = 0;
  std::span<const int> partitions;
  std::span<const int> jackknife_blocks;
};

/// Read-only view of a bit-packed genotype file that yields standardized
/// columns in blocks. Metadata is copied on assignment of partitions or
/// jackknife blocks; the underlying file handle is shared.
class GenotypeSource {
 public:
  static GenotypeSource open(const BedPaths& paths,
                             const std::optional<std::vector<std::string>>& keep_ids = {},
                             std::size_t block_width = 512);

  std::size_t n_subjects() const { return subject_ids_.size(); }
  std::size_t n_snps() const { return snps_.size(); }
  const std::vector<SnpMeta>& snps() const { return snps_; }
  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const LoadSummary& load_summary() const { return summary_; }

  int n_partitions() const { return n_partitions_; }
  int n_jackknife_blocks() const { return n_jackknife_; }
  std::vector<std::size_t> partition_sizes() const;

  std::size_t block_width() const { return block_width_; }
  GenotypeSource with_block_width(std::size_t width) const;
  std::size_t n_blocks() const;

  GenotypeSource with_partitions(std::vector<int> labels, int n_partitions) const;
  GenotypeSource with_jackknife_blocks(std::vector<int> labels, int n_blocks) const;

  /// Standardized columns for retained SNPs [begin, end); missing genotypes
  /// are mean-imputed, i.e. decode to zero. Safe to call concurrently.
  void decode(std::size_t begin, std::size_t end, Eigen::MatrixXd& out) const;

  /// Raw A1 dosages for retained SNPs [begin, end) with kMissingDosage for
  /// missing calls.
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> decode_dosages(
      std::size_t begin, std::size_t end) const;

  /// Decodes every block exactly once and hands it to the visitor. With one
  /// thread the blocks arrive in file order; with more, worker threads decode
  /// and call the visitor concurrently, each call owning its block.
  void stream_blocks(const std::function<void(const GenotypeBlock&)>& visitor,
                     int threads = 1) const;

  /// Block index -> [begin, end) retained-SNP range.
  std::pair<std::size_t, std::size_t> block_range(std::size_t block) const;

  IoStats io_stats() const;
  void reset_io_stats() const;

 private:
  struct Backing;

  std::shared_ptr<Backing> backing_;
  std::vector<std::string> subject_ids_;
  std::vector<SnpMeta> snps_;
  std::vector<int> partition_labels_;
  std::vector<int> jackknife_labels_;
  LoadSummary summary_;
  int n_partitions_ = 1;
  int n_jackknife_ = 1;
  std::size_t block_width_ = 512;
};

/// Writes a SNP-major .bed/.bim/.fam triplet one SNP at a time.
class BedWriter {
 public:
  BedWriter(const BedPaths& paths, std::vector<std::string> subject_ids);
  ~BedWriter();
  BedWriter(const BedWriter&) = delete;
  BedWriter& operator=(const BedWriter&) = delete;

  /// Dosages are A1 counts in {0,1,2} or kMissingDosage.
  void write_snp(const std::string& id, std::span<const std::int8_t> dosages,
                 const std::string& chrom = "1", std::int64_t position = 0);
  void close();

  std::size_t n_written() const { return n_written_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t n_subjects_;
  std::size_t n_written_ = 0;
};

// --- partitions ---

enum class PartitionMode { explicit_file, ld_maf_grid };

struct PartitionScheme {
  PartitionMode mode = PartitionMode::explicit_file;
  std::vector<double> maf_knots{0.01, 0.02, 0.03, 0.04, 0.05};
  int ld_quantiles = 4;
  std::unordered_map<std::string, int> assignments;

  int grid_size() const {
    return ld_quantiles * static_cast<int>(maf_knots.size() + 1);
  }
};

/// Row-major (ld bin, maf bin) labels. LD bins are quantiles of the LDAK
/// score by rank (ties broken by SNP order); MAF bins are the intervals cut
/// by the knots inside [0, 0.5].
std::vector<int> ld_maf_grid_labels(std::span<const double> maf,
                                    std::span<const double> ldak,
                                    std::span<const double> knots, int ld_quantiles);

GenotypeSource assign_partitions(const GenotypeSource& src, const PartitionScheme& scheme,
                                 std::span<const double> maf = {},
                                 std::span<const double> ldak = {});

/// K contiguous, near-equal partitions in file order.
GenotypeSource assign_contiguous_partitions(const GenotypeSource& src, int k);

// --- jackknife blocks ---

enum class JackknifeMode { within_partition, global };

/// Labels for `count` consecutive items split into `blocks` groups whose
/// sizes differ by at most one, the larger groups first.
std::vector<int> balanced_block_labels(std::size_t count, int blocks);

GenotypeSource assign_jackknife_blocks(const GenotypeSource& src, int blocks,
                                       JackknifeMode mode = JackknifeMode::within_partition);

}  // namespace cvc
