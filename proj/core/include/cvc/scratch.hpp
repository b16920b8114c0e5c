#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cvc {

struct ScratchOptions {
  std::size_t memory_budget = std::size_t{2} << 30;  // bytes held in RAM before spilling
  std::filesystem::path dir = std::filesystem::temp_directory_path();
  bool keep = false;  // leave spill files on disk after the run
};

/// A stack of equally shaped column-major double matrices ("slabs"), held on
/// the heap or in a memory-mapped temporary file. Spill files are raw
/// little-endian float64 with a JSON sidecar describing shape and role.
class ScratchArray {
 public:
  ScratchArray() = default;
  ScratchArray(std::string role, std::size_t slabs, Eigen::Index rows, Eigen::Index cols,
               bool spill, const ScratchOptions& opts);
  ~ScratchArray();

  ScratchArray(ScratchArray&& other) noexcept;
  ScratchArray& operator=(ScratchArray&& other) noexcept;
  ScratchArray(const ScratchArray&) = delete;
  ScratchArray& operator=(const ScratchArray&) = delete;

  Eigen::Map<Eigen::MatrixXd> slab(std::size_t i);
  Eigen::Map<const Eigen::MatrixXd> slab(std::size_t i) const;

  std::size_t slabs() const { return slabs_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::size_t bytes() const { return slabs_ * slab_size() * sizeof(double); }
  bool spilled() const { return mapped_ != nullptr; }
  const std::filesystem::path& path() const { return path_; }
  const std::filesystem::path& manifest_path() const { return manifest_; }

 private:
  std::size_t slab_size() const {
    return static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_);
  }
  double* base();
  const double* base() const;
  void release() noexcept;

  std::string role_;
  std::size_t slabs_ = 0;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<double> heap_;
  double* mapped_ = nullptr;
  std::filesystem::path path_, manifest_;
  bool keep_ = false;
};

}  // namespace cvc
