#include "fixtures.hpp"

#include <atomic>
#include <cmath>

#include <unistd.h>

namespace cvc::testing {

namespace {
std::atomic<int> counter{0};
}

TempDir::TempDir(const std::string& tag) {
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

BedPaths write_bed(const fs::path& dir, const std::string& name, const Dosages& dosages) {
  const BedPaths paths = BedPaths::from_prefix(dir / name);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < dosages.rows(); ++i) ids.push_back("i" + std::to_string(i + 1));
  BedWriter writer(paths, ids);
  std::vector<std::int8_t> col(static_cast<std::size_t>(dosages.rows()));
  for (Eigen::Index j = 0; j < dosages.cols(); ++j) {
    for (Eigen::Index i = 0; i < dosages.rows(); ++i) col[static_cast<std::size_t>(i)] = dosages(i, j);
    writer.write_snp("v" + std::to_string(j + 1), col, "1", j + 1);
  }
  writer.close();
  return paths;
}

Dosages random_dosages(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng, double missing_rate) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dosages d(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    while (true) {
      const double f = 0.05 + 0.45 * unif(rng);
      std::binomial_distribution<int> bin(2, f);
      for (Eigen::Index i = 0; i < n; ++i) {
        d(i, j) = unif(rng) < missing_rate ? kMissingDosage : static_cast<std::int8_t>(bin(rng));
      }
      int lo = 3, hi = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d(i, j) < 0) continue;
        lo = std::min<int>(lo, d(i, j));
        hi = std::max<int>(hi, d(i, j));
      }
      if (hi > lo) break;
    }
  }
  return d;
}

Eigen::MatrixXd standardize(const Dosages& dosages) {
  const Eigen::Index n = dosages.rows();
  Eigen::MatrixXd x(n, dosages.cols());
  for (Eigen::Index j = 0; j < dosages.cols(); ++j) {
    double sum = 0.0;
    int observed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dosages(i, j) >= 0) {
        sum += dosages(i, j);
        ++observed;
      }
    }
    const double mean = sum / observed;
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = dosages(i, j) >= 0 ? dosages(i, j) - mean : 0.0;
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n));
    x.col(j) /= sd;
  }
  return x;
}

Eigen::MatrixXd dense_projector(const Eigen::MatrixXd& w) {
  if (w.cols() == 0) return Eigen::MatrixXd::Zero(w.rows(), w.rows());
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(w);
  return w * cod.pseudoInverse();
}

Eigen::MatrixXd dense_synthetic(const SyntheticDecomposition& syn) {
  Eigen::MatrixXd y = syn.y1 * syn.y1.transpose();
  y.diagonal() = syn.y2;
  return y;
}

namespace {

std::vector<Eigen::MatrixXd> grms(const Eigen::MatrixXd& x, const std::vector<int>& partitions, int k) {
  std::vector<Eigen::MatrixXd> out;
  for (int kk = 0; kk < k; ++kk) {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < partitions.size(); ++j) {
      if (partitions[j] == kk) cols.push_back(static_cast<Eigen::Index>(j));
    }
    Eigen::MatrixXd xk(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) xk.col(static_cast<Eigen::Index>(c)) = x.col(cols[c]);
    out.push_back(xk * xk.transpose() / static_cast<double>(cols.size()));
  }
  return out;
}

}  // namespace

Eigen::VectorXd dense_least_squares(const Eigen::MatrixXd& x, const std::vector<int>& partitions,
                                    int k, const Eigen::MatrixXd& w, const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - dense_projector(w);
  const auto ks = grms(x, partitions, k);
  Eigen::MatrixXd design(n * n, k + 1);
  for (int kk = 0; kk < k; ++kk) {
    const Eigen::MatrixXd vkv = v * ks[static_cast<std::size_t>(kk)] * v;
    design.col(kk) = Eigen::Map<const Eigen::VectorXd>(vkv.data(), n * n);
  }
  design.col(k) = Eigen::Map<const Eigen::VectorXd>(v.data(), n * n);
  const Eigen::MatrixXd vyv = v * y * v;
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(vyv.data(), n * n);
  return design.colPivHouseholderQr().solve(target);
}

DenseSystem dense_normal_equations(const Eigen::MatrixXd& x, const std::vector<int>& partitions,
                                   int k, const Eigen::MatrixXd& w, const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - dense_projector(w);
  const auto ks = grms(x, partitions, k);
  DenseSystem s;
  s.lhs.resize(k + 1, k + 1);
  s.rhs.resize(k + 1);
  for (int a = 0; a < k; ++a) {
    const Eigen::MatrixXd kv_a = ks[static_cast<std::size_t>(a)] * v;
    for (int b = 0; b < k; ++b) {
      s.lhs(a, b) = (kv_a * ks[static_cast<std::size_t>(b)] * v).trace();
    }
    s.lhs(a, k) = s.lhs(k, a) = kv_a.trace();
    s.rhs(a) = (y * v * ks[static_cast<std::size_t>(a)] * v).trace();
  }
  s.lhs(k, k) = v.trace();
  s.rhs(k) = (y * v).trace();
  return s;
}

std::vector<CensoredSample> random_censored(Eigen::Index n, double rate, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<CensoredSample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    const double y = normal(rng);
    if (unif(rng) < rate) {
      s = {y - std::abs(normal(rng)), false};
    } else {
      s = {y, true};
    }
  }
  return out;
}

Eigen::MatrixXd random_covariates(Eigen::Index n, Eigen::Index extra, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd w(n, extra + 1);
  w.col(0).setOnes();
  for (Eigen::Index c = 1; c <= extra; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) w(i, c) = normal(rng);
  }
  return w;
}

}  // namespace cvc::testing
