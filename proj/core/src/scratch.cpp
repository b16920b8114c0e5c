#include "cvc/scratch.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cvc/error.hpp"

namespace cvc {

namespace {

std::filesystem::path unique_scratch_path(const std::filesystem::path& dir, const std::string& role) {
  static std::atomic<unsigned> counter{0};
  return dir / ("cvc-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + role +
                ".f64");
}

}  // namespace

ScratchArray::ScratchArray(std::string role, std::size_t slabs, Eigen::Index rows,
                           Eigen::Index cols, bool spill, const ScratchOptions& opts)
    : role_(std::move(role)), slabs_(slabs), rows_(rows), cols_(cols), keep_(opts.keep) {
  const std::size_t n = slabs_ * slab_size();
  if (!spill || n == 0) {
    heap_.assign(n, 0.0);
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(opts.dir, ec);
  path_ = unique_scratch_path(opts.dir, role_);
  const int fd = ::open(path_.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw IoError("cannot create scratch file " + path_.string());
  const auto bytes = static_cast<off_t>(n * sizeof(double));
  if (::ftruncate(fd, bytes) != 0) {
    ::close(fd);
    throw IoError("cannot size scratch file " + path_.string() + ": " + std::strerror(errno));
  }
  void* p = ::mmap(nullptr, static_cast<std::size_t>(bytes), PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) throw IoError("cannot map scratch file " + path_.string());
  mapped_ = static_cast<double*>(p);

  manifest_ = path_;
  manifest_ += ".json";
  nlohmann::json meta = {
      {"role", role_},
      {"dtype", "float64"},
      {"byte_order", "little"},
      {"shape", {slabs_, cols_, rows_}},
      {"layout", "slab-major, each slab column-major rows x cols"},
      {"file", path_.filename().string()},
  };
  std::ofstream out(manifest_);
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("cannot write scratch manifest " + manifest_.string());
}

ScratchArray::~ScratchArray() { release(); }

ScratchArray::ScratchArray(ScratchArray&& other) noexcept { *this = std::move(other); }

ScratchArray& ScratchArray::operator=(ScratchArray&& other) noexcept {
  if (this == &other) return *this;
  release();
  role_ = std::move(other.role_);
  slabs_ = other.slabs_;
  rows_ = other.rows_;
  cols_ = other.cols_;
  heap_ = std::move(other.heap_);
  mapped_ = other.mapped_;
  path_ = std::move(other.path_);
  manifest_ = std::move(other.manifest_);
  keep_ = other.keep_;
  other.mapped_ = nullptr;
  other.slabs_ = 0;
  other.path_.clear();
  other.manifest_.clear();
  return *this;
}

void ScratchArray::release() noexcept {
  if (mapped_) {
    ::munmap(mapped_, slabs_ * slab_size() * sizeof(double));
    mapped_ = nullptr;
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
      std::filesystem::remove(manifest_, ec);
    }
  }
  heap_.clear();
}

double* ScratchArray::base() { return mapped_ ? mapped_ : heap_.data(); }
const double* ScratchArray::base() const { return mapped_ ? mapped_ : heap_.data(); }

Eigen::Map<Eigen::MatrixXd> ScratchArray::slab(std::size_t i) {
  return {base() + i * slab_size(), rows_, cols_};
}

Eigen::Map<const Eigen::MatrixXd> ScratchArray::slab(std::size_t i) const {
  return {base() + i * slab_size(), rows_, cols_};
}

}  // namespace cvc
