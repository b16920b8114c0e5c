#include "cvc/genotype.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "cvc/error.hpp"

namespace cvc {

namespace {

std::size_t bytes_per_snp(std::size_t n_subjects) { return (n_subjects + 3) / 4; }

// A1 dosage for each two-bit code; -1 marks missing.
constexpr std::array<std::int8_t, 4> kCodeDosage = {2, kMissingDosage, 1, 0};

std::vector<std::vector<std::string>> read_whitespace_table(const fs::path& path,
                                                            std::size_t min_fields) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(std::move(f));
    if (fields.empty()) continue;
    if (fields.size() < min_fields) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(min_fields) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return rows;
}

}  // namespace

BedPaths BedPaths::from_prefix(const fs::path& prefix) {
  const std::string p = prefix.string();
  return {p + ".bed", p + ".bim", p + ".fam"};
}

double SnpMeta::maf() const {
  const double f = mean / 2.0;
  return std::min(f, 1.0 - f);
}

struct GenotypeSource::Backing {
  int fd = -1;
  std::string path;
  std::size_t n_file_subjects = 0;
  std::size_t stride = 0;                 // bytes per SNP
  std::vector<std::size_t> rows;          // kept subject -> position in .fam
  bool identity_rows = true;
  mutable std::atomic<std::uint64_t> bytes_read{0};
  mutable std::atomic<std::uint64_t> snp_reads{0};
  mutable std::atomic<std::uint64_t> passes{0};

  ~Backing() {
    if (fd >= 0) ::close(fd);
  }

  void read_rows(std::size_t first_row, std::size_t count, std::uint8_t* dst) const {
    const std::size_t want = count * stride;
    const off_t offset = static_cast<off_t>(3 + first_row * stride);
    std::size_t got = 0;
    while (got < want) {
      const ssize_t r = ::pread(fd, dst + got, want - got, offset + static_cast<off_t>(got));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw IoError("read failed on " + path + ": " + std::strerror(errno));
      }
      if (r == 0) throw IoError("unexpected end of file in " + path);
      got += static_cast<std::size_t>(r);
    }
    bytes_read += want;
  }

  template <class F>
  void for_each_code(const std::uint8_t* row, F&& f) const {
    if (identity_rows) {
      for (std::size_t i = 0; i < n_file_subjects; ++i) {
        f(i, (row[i >> 2] >> ((i & 3) * 2)) & 3);
      }
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t p = rows[i];
        f(i, (row[p >> 2] >> ((p & 3) * 2)) & 3);
      }
    }
  }
};

GenotypeSource GenotypeSource::open(const BedPaths& paths,
                                    const std::optional<std::vector<std::string>>& keep_ids,
                                    std::size_t block_width) {
  if (block_width == 0) throw InputError("block width must be positive");
  const auto fam = read_whitespace_table(paths.fam, 2);
  const auto bim = read_whitespace_table(paths.bim, 6);

  GenotypeSource src;
  src.block_width_ = block_width;
  auto backing = std::make_shared<Backing>();
  backing->path = paths.bed.string();
  backing->n_file_subjects = fam.size();
  backing->stride = bytes_per_snp(fam.size());

  if (keep_ids) {
    std::unordered_set<std::string> keep(keep_ids->begin(), keep_ids->end());
    for (std::size_t i = 0; i < fam.size(); ++i) {
      if (keep.count(fam[i][1])) {
        backing->rows.push_back(i);
        src.subject_ids_.push_back(fam[i][1]);
      }
    }
    backing->identity_rows = backing->rows.size() == fam.size();
  } else {
    for (std::size_t i = 0; i < fam.size(); ++i) {
      backing->rows.push_back(i);
      src.subject_ids_.push_back(fam[i][1]);
    }
  }
  if (src.subject_ids_.empty()) throw InputError("no subjects retained from " + paths.fam.string());

  backing->fd = ::open(paths.bed.c_str(), O_RDONLY);
  if (backing->fd < 0) throw IoError("cannot open " + paths.bed.string());
  std::uint8_t magic[3];
  if (::pread(backing->fd, magic, 3, 0) != 3 || std::memcmp(magic, kBedMagic, 3) != 0) {
    throw InputError("not a SNP-major BED file: " + paths.bed.string());
  }
  struct stat st {};
  if (::fstat(backing->fd, &st) != 0) throw IoError("cannot stat " + paths.bed.string());
  const std::uint64_t expected = 3 + static_cast<std::uint64_t>(bim.size()) * backing->stride;
  if (static_cast<std::uint64_t>(st.st_size) != expected) {
    throw InputError("truncated genotype file: " + paths.bed.string() + " has " +
                     std::to_string(st.st_size) + " bytes, expected " +
                     std::to_string(expected));
  }

  src.summary_.subjects_in_file = fam.size();
  src.summary_.snps_in_file = bim.size();

  // One pass for allele statistics.
  const double n = static_cast<double>(src.subject_ids_.size());
  const std::size_t chunk = std::max<std::size_t>(1, (8u << 20) / std::max<std::size_t>(1, backing->stride));
  std::vector<std::uint8_t> buf;
  for (std::size_t first = 0; first < bim.size(); first += chunk) {
    const std::size_t count = std::min(chunk, bim.size() - first);
    buf.resize(count * backing->stride);
    backing->read_rows(first, count, buf.data());
    for (std::size_t s = 0; s < count; ++s) {
      std::array<std::size_t, 4> tally{};
      backing->for_each_code(buf.data() + s * backing->stride,
                             [&](std::size_t, unsigned code) { ++tally[code]; });
      const auto& row = bim[first + s];
      const std::size_t observed = tally[0] + tally[2] + tally[3];
      SnpMeta meta;
      meta.chrom = row[0];
      meta.id = row[1];
      meta.position = std::strtoll(row[3].c_str(), nullptr, 10);
      meta.a1 = row[4];
      meta.a2 = row[5];
      meta.file_index = first + s;
      meta.n_missing = tally[1];
      if (observed == 0) {
        src.summary_.dropped_snps.push_back(meta.id);
        continue;
      }
      const double sum = 2.0 * static_cast<double>(tally[0]) + static_cast<double>(tally[2]);
      meta.mean = sum / static_cast<double>(observed);
      double ss = 0.0;
      for (unsigned code : {0u, 2u, 3u}) {
        const double dev = kCodeDosage[code] - meta.mean;
        ss += static_cast<double>(tally[code]) * dev * dev;
      }
      if (!(ss > 0.0)) {
        src.summary_.dropped_snps.push_back(meta.id);
        continue;
      }
      meta.std = std::sqrt(ss / n);
      src.snps_.push_back(std::move(meta));
    }
  }
  if (!src.summary_.dropped_snps.empty()) {
    src.summary_.warnings.push_back("dropped " + std::to_string(src.summary_.dropped_snps.size()) +
                                    " monomorphic or all-missing SNP(s)");
  }
  if (src.snps_.empty()) throw InputError("no polymorphic SNPs in " + paths.bed.string());

  src.partition_labels_.assign(src.snps_.size(), 0);
  src.jackknife_labels_.assign(src.snps_.size(), 0);
  src.backing_ = std::move(backing);
  return src;
}

std::vector<std::size_t> GenotypeSource::partition_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n_partitions_), 0);
  for (int p : partition_labels_) ++sizes[static_cast<std::size_t>(p)];
  return sizes;
}

GenotypeSource GenotypeSource::with_block_width(std::size_t width) const {
  if (width == 0) throw InputError("block width must be positive");
  GenotypeSource out = *this;
  out.block_width_ = width;
  return out;
}

std::size_t GenotypeSource::n_blocks() const {
  return (snps_.size() + block_width_ - 1) / block_width_;
}

std::pair<std::size_t, std::size_t> GenotypeSource::block_range(std::size_t block) const {
  const std::size_t begin = block * block_width_;
  return {begin, std::min(begin + block_width_, snps_.size())};
}

GenotypeSource GenotypeSource::with_partitions(std::vector<int> labels, int n_partitions) const {
  if (labels.size() != snps_.size()) throw InputError("partition labels do not match SNP count");
  if (n_partitions < 1) throw InputError("need at least one partition");
  for (int p : labels) {
    if (p < 0 || p >= n_partitions) throw InputError("partition label out of range");
  }
  GenotypeSource out = *this;
  out.partition_labels_ = std::move(labels);
  out.n_partitions_ = n_partitions;
  for (std::size_t j = 0; j < out.snps_.size(); ++j) out.snps_[j].partition = out.partition_labels_[j];
  return out;
}

GenotypeSource GenotypeSource::with_jackknife_blocks(std::vector<int> labels, int n_blocks) const {
  if (labels.size() != snps_.size()) throw InputError("jackknife labels do not match SNP count");
  if (n_blocks < 1) throw InputError("need at least one jackknife block");
  for (int b : labels) {
    if (b < 0 || b >= n_blocks) throw InputError("jackknife label out of range");
  }
  GenotypeSource out = *this;
  out.jackknife_labels_ = std::move(labels);
  out.n_jackknife_ = n_blocks;
  for (std::size_t j = 0; j < out.snps_.size(); ++j) {
    out.snps_[j].jackknife_block = out.jackknife_labels_[j];
  }
  return out;
}

void GenotypeSource::decode(std::size_t begin, std::size_t end, Eigen::MatrixXd& out) const {
  if (begin > end || end > snps_.size()) throw InputError("decode range out of bounds");
  const auto n = static_cast<Eigen::Index>(n_subjects());
  out.resize(n, static_cast<Eigen::Index>(end - begin));
  if (begin == end) return;
  const Backing& b = *backing_;
  const std::size_t first_row = snps_[begin].file_index;
  const std::size_t rows = snps_[end - 1].file_index - first_row + 1;
  std::vector<std::uint8_t> buf(rows * b.stride);
  b.read_rows(first_row, rows, buf.data());
  b.snp_reads += end - begin;

  for (std::size_t s = begin; s < end; ++s) {
    const SnpMeta& m = snps_[s];
    std::array<double, 4> value{};
    for (unsigned code = 0; code < 4; ++code) {
      value[code] = code == 1 ? 0.0 : (kCodeDosage[code] - m.mean) / m.std;
    }
    double* col = out.col(static_cast<Eigen::Index>(s - begin)).data();
    const std::uint8_t* row = buf.data() + (m.file_index - first_row) * b.stride;
    if (b.identity_rows) {
      // Four subjects per byte.
      const std::size_t full = b.n_file_subjects / 4;
      for (std::size_t byte = 0; byte < full; ++byte) {
        const unsigned v = row[byte];
        double* dst = col + 4 * byte;
        dst[0] = value[v & 3];
        dst[1] = value[(v >> 2) & 3];
        dst[2] = value[(v >> 4) & 3];
        dst[3] = value[(v >> 6) & 3];
      }
      for (std::size_t i = 4 * full; i < b.n_file_subjects; ++i) {
        col[i] = value[(row[i >> 2] >> ((i & 3) * 2)) & 3];
      }
    } else {
      b.for_each_code(row, [&](std::size_t i, unsigned code) { col[i] = value[code]; });
    }
  }
}

Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> GenotypeSource::decode_dosages(
    std::size_t begin, std::size_t end) const {
  if (begin > end || end > snps_.size()) throw InputError("decode range out of bounds");
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> out(
      static_cast<Eigen::Index>(n_subjects()), static_cast<Eigen::Index>(end - begin));
  const Backing& b = *backing_;
  std::vector<std::uint8_t> buf(b.stride);
  for (std::size_t s = begin; s < end; ++s) {
    b.read_rows(snps_[s].file_index, 1, buf.data());
    b.for_each_code(buf.data(), [&](std::size_t i, unsigned code) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s - begin)) = kCodeDosage[code];
    });
  }
  return out;
}

void GenotypeSource::stream_blocks(const std::function<void(const GenotypeBlock&)>& visitor,
                                   int threads) const {
  backing_->passes += 1;
  const std::size_t blocks = n_blocks();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    Eigen::MatrixXd x;
    while (!failed) {
      const std::size_t blk = next++;
      if (blk >= blocks) return;
      const auto [begin, end] = block_range(blk);
      try {
        try {
          decode(begin, end, x);
        } catch (const IoError& e) {
          throw IoError(std::string(e.what()) + " (block " + std::to_string(blk) + " of " +
                        std::to_string(blocks) + ")");
        }
        const GenotypeBlock view{
            x, blk, begin, end,
            std::span<const int>(partition_labels_).subspan(begin, end - begin),
            std::span<const int>(jackknife_labels_).subspan(begin, end - begin)};
        visitor(view);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(blocks)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

IoStats GenotypeSource::io_stats() const {
  return {backing_->bytes_read.load(), backing_->snp_reads.load(), backing_->passes.load()};
}

void GenotypeSource::reset_io_stats() const {
  backing_->bytes_read = 0;
  backing_->snp_reads = 0;
  backing_->passes = 0;
}

// --- writer ---

struct BedWriter::Impl {
  BedPaths paths;
  std::ofstream bed, bim;
  std::vector<std::uint8_t> row;
};

BedWriter::BedWriter(const BedPaths& paths, std::vector<std::string> subject_ids)
    : impl_(std::make_unique<Impl>()), n_subjects_(subject_ids.size()) {
  impl_->paths = paths;
  {
    std::ofstream fam(paths.fam);
    if (!fam) throw IoError("cannot write " + paths.fam.string());
    for (const auto& id : subject_ids) fam << id << ' ' << id << " 0 0 0 -9\n";
    if (!fam) throw IoError("write failed on " + paths.fam.string());
  }
  impl_->bed.open(paths.bed, std::ios::binary);
  impl_->bim.open(paths.bim);
  if (!impl_->bed || !impl_->bim) throw IoError("cannot write " + paths.bed.string());
  impl_->bed.write(reinterpret_cast<const char*>(kBedMagic), 3);
  impl_->row.resize(bytes_per_snp(n_subjects_));
}

BedWriter::~BedWriter() {
  try {
    close();
  } catch (...) {
  }
}

void BedWriter::write_snp(const std::string& id, std::span<const std::int8_t> dosages,
                          const std::string& chrom, std::int64_t position) {
  if (!impl_->bed.is_open()) throw IoError("writer already closed");
  if (dosages.size() != n_subjects_) throw InputError("dosage vector has wrong length");
  std::fill(impl_->row.begin(), impl_->row.end(), 0);
  for (std::size_t i = 0; i < n_subjects_; ++i) {
    unsigned code;
    switch (dosages[i]) {
      case 2: code = 0; break;
      case 1: code = 2; break;
      case 0: code = 3; break;
      case kMissingDosage: code = 1; break;
      default: throw InputError("dosage must be 0, 1, 2 or missing");
    }
    impl_->row[i >> 2] |= static_cast<std::uint8_t>(code << ((i & 3) * 2));
  }
  impl_->bed.write(reinterpret_cast<const char*>(impl_->row.data()),
                   static_cast<std::streamsize>(impl_->row.size()));
  impl_->bim << chrom << '\t' << id << "\t0\t" << (position > 0 ? position : static_cast<std::int64_t>(n_written_ + 1))
             << "\tA\tG\n";
  ++n_written_;
}

void BedWriter::close() {
  if (!impl_ || !impl_->bed.is_open()) return;
  impl_->bed.close();
  impl_->bim.close();
  if (impl_->bed.fail() || impl_->bim.fail())
    throw IoError("write failed on " + impl_->paths.bed.string());
}

// --- partitions ---

std::vector<int> ld_maf_grid_labels(std::span<const double> maf, std::span<const double> ldak,
                                    std::span<const double> knots, int ld_quantiles) {
  if (maf.size() != ldak.size()) throw InputError("maf and ldak vectors differ in length");
  if (ld_quantiles < 1) throw InputError("ld_quantiles must be positive");
  if (!std::is_sorted(knots.begin(), knots.end())) throw InputError("MAF knots must be sorted");
  const std::size_t m = maf.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ldak[a] < ldak[b]; });
  std::vector<int> ld_bin(m);
  for (std::size_t rank = 0; rank < m; ++rank) {
    ld_bin[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(ld_quantiles) / m);
  }
  const int maf_bins = static_cast<int>(knots.size()) + 1;
  std::vector<int> labels(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (!(maf[j] > 0.0 && maf[j] <= 0.5)) {
      throw InputError("MAF outside (0, 0.5] at SNP index " + std::to_string(j));
    }
    const int mb = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), maf[j]) - knots.begin());
    labels[j] = ld_bin[j] * maf_bins + mb;
  }
  return labels;
}

GenotypeSource assign_partitions(const GenotypeSource& src, const PartitionScheme& scheme,
                                 std::span<const double> maf, std::span<const double> ldak) {
  const auto& snps = src.snps();
  if (scheme.mode == PartitionMode::ld_maf_grid) {
    if (maf.size() != snps.size() || ldak.size() != snps.size()) {
      throw InputError("grid partitioning needs MAF and LDAK values for every SNP");
    }
    return src.with_partitions(ld_maf_grid_labels(maf, ldak, scheme.maf_knots, scheme.ld_quantiles),
                               scheme.grid_size());
  }

  std::vector<int> labels(snps.size());
  std::vector<std::string> missing;
  int k = 0;
  for (std::size_t j = 0; j < snps.size(); ++j) {
    auto it = scheme.assignments.find(snps[j].id);
    if (it == scheme.assignments.end()) {
      missing.push_back(snps[j].id);
      continue;
    }
    if (it->second < 0) throw InputError("negative partition for SNP " + snps[j].id);
    labels[j] = it->second;
    k = std::max(k, it->second + 1);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " SNP(s) missing from partition assignment: ";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
      msg += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 10) msg += ", ...";
    throw InputError(msg);
  }
  return src.with_partitions(std::move(labels), k);
}

GenotypeSource assign_contiguous_partitions(const GenotypeSource& src, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > src.n_snps()) {
    throw InputError("number of partitions must be in [1, M]");
  }
  return src.with_partitions(balanced_block_labels(src.n_snps(), k), k);
}

std::vector<int> balanced_block_labels(std::size_t count, int blocks) {
  if (blocks < 1) throw InputError("number of blocks must be positive");
  const auto nb = static_cast<std::size_t>(blocks);
  const std::size_t base = count / nb, extra = count % nb;
  std::vector<int> labels;
  labels.reserve(count);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    labels.insert(labels.end(), size, static_cast<int>(b));
  }
  return labels;
}

GenotypeSource assign_jackknife_blocks(const GenotypeSource& src, int blocks,
                                       JackknifeMode mode) {
  if (blocks < 1) throw InputError("number of jackknife blocks must be positive");
  if (static_cast<std::size_t>(blocks) > src.n_snps()) {
    throw InputError("jackknife blocks (" + std::to_string(blocks) + ") exceed the number of SNPs (" +
                     std::to_string(src.n_snps()) + ")");
  }
  if (mode == JackknifeMode::global) {
    return src.with_jackknife_blocks(balanced_block_labels(src.n_snps(), blocks), blocks);
  }
  const auto& snps = src.snps();
  const auto sizes = src.partition_sizes();
  std::vector<std::vector<int>> per_partition(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) per_partition[k] = balanced_block_labels(sizes[k], blocks);
  std::vector<std::size_t> cursor(sizes.size(), 0);
  std::vector<int> labels(snps.size());
  for (std::size_t j = 0; j < snps.size(); ++j) {
    const auto k = static_cast<std::size_t>(snps[j].partition);
    labels[j] = per_partition[k][cursor[k]++];
  }
  return src.with_jackknife_blocks(std::move(labels), blocks);
}

}  // namespace cvc
