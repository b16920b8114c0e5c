#include <algorithm>
#include <string>

#include "cvc/error.hpp"
#include "cvc/moments.hpp"

namespace cvc {

namespace {

constexpr Eigen::Index kGramChunk = 256;

void check_guard(Eigen::Index n, Eigen::Index m) {
  if (static_cast<double>(n) * static_cast<double>(m) > static_cast<double>(kExactTraceMaxEntries)) {
    throw InputError("exact traces need N * M <= " + std::to_string(kExactTraceMaxEntries) +
                     " (got " + std::to_string(n) + " * " + std::to_string(m) + ")");
  }
}

}  // namespace

NormalEquationSystem exact_trace_system(const Eigen::MatrixXd& x, std::span<const int> partitions,
                                        int k, std::span<const int> jackknife_blocks, int j,
                                        const CovariateBasis& basis,
                                        const SyntheticDecomposition& syn) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  check_guard(n, m);
  if (basis.n() != n || syn.size() != n) throw InputError("exact traces: subject counts differ");
  if (partitions.size() != static_cast<std::size_t>(m) ||
      jackknife_blocks.size() != static_cast<std::size_t>(m)) {
    throw InputError("exact traces: label count differs from SNP count");
  }
  if (k < 1 || j < 1) throw InputError("exact traces: need at least one partition and block");

  const auto groups = static_cast<std::size_t>(k) * static_cast<std::size_t>(j);
  std::vector<std::size_t> group(static_cast<std::size_t>(m));
  std::vector<std::size_t> count(groups, 0);
  for (Eigen::Index c = 0; c < m; ++c) {
    const int kk = partitions[static_cast<std::size_t>(c)];
    const int jj = jackknife_blocks[static_cast<std::size_t>(c)];
    if (kk < 0 || kk >= k || jj < 0 || jj >= j) throw InputError("exact traces: label out of range");
    const std::size_t g = static_cast<std::size_t>(kk) * static_cast<std::size_t>(j) +
                          static_cast<std::size_t>(jj);
    group[static_cast<std::size_t>(c)] = g;
    ++count[g];
  }

  const Eigen::MatrixXd xt = project_out(basis, x);  // V X
  const Eigen::RowVectorXd xt_y1 = syn.y1.transpose() * xt;

  std::vector<double> frob(groups, 0.0), cy(groups, 0.0);
  for (Eigen::Index c = 0; c < m; ++c) {
    const std::size_t g = group[static_cast<std::size_t>(c)];
    frob[g] += xt.col(c).squaredNorm();
    cy[g] += (xt.col(c).array().square() * syn.d.array()).sum() + xt_y1(c) * xt_y1(c);
  }

  // s[g][h] = sum over a in g, c in h of (x~_a . x~_c)^2
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups),
                                            static_cast<Eigen::Index>(groups));
  for (Eigen::Index begin = 0; begin < m; begin += kGramChunk) {
    const Eigen::Index width = std::min(kGramChunk, m - begin);
    const Eigen::MatrixXd gram = xt.transpose() * xt.middleCols(begin, width);
    for (Eigen::Index c = 0; c < width; ++c) {
      const auto h = static_cast<Eigen::Index>(group[static_cast<std::size_t>(begin + c)]);
      for (Eigen::Index a = 0; a < m; ++a) {
        const double v = gram(a, c);
        s(static_cast<Eigen::Index>(group[static_cast<std::size_t>(a)]), h) += v * v;
      }
    }
  }

  NormalEquationSystem sys;
  sys.n = n;
  sys.rank = basis.rank();
  const auto K = static_cast<std::size_t>(k);
  sys.m_k.assign(K, 0);
  sys.m_k_minus.assign(K, std::vector<std::size_t>(static_cast<std::size_t>(j), 0));
  auto gid = [&](int kk, int jj) {
    return static_cast<Eigen::Index>(kk) * j + jj;
  };
  for (int kk = 0; kk < k; ++kk) {
    for (int jj = 0; jj < j; ++jj) sys.m_k[static_cast<std::size_t>(kk)] += count[static_cast<std::size_t>(gid(kk, jj))];
    if (sys.m_k[static_cast<std::size_t>(kk)] == 0) {
      throw InputError("partition " + std::to_string(kk) + " has no SNPs");
    }
  }

  // Partition-level totals of s, and block-row / block-column sums.
  Eigen::MatrixXd s_total = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd row_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups), k);
  for (int a = 0; a < k; ++a) {
    for (int ja = 0; ja < j; ++ja) {
      for (int b = 0; b < k; ++b) {
        for (int jb = 0; jb < j; ++jb) {
          const double v = s(gid(a, ja), gid(b, jb));
          s_total(a, b) += v;
          row_sum(gid(a, ja), b) += v;
        }
      }
    }
  }

  const double corner = static_cast<double>(n - basis.rank());
  const double rhs_last =
      (syn.d.array() * (1.0 - basis.leverages().array())).sum() + project_out(basis, syn.y1).squaredNorm();

  auto build = [&](int leave_out) {
    LinearSystem ls;
    ls.lhs = Eigen::MatrixXd::Zero(k + 1, k + 1);
    ls.rhs = Eigen::VectorXd::Zero(k + 1);
    std::vector<double> mk(K);
    for (int a = 0; a < k; ++a) {
      double fr = 0.0, c = 0.0;
      std::size_t size = 0;
      for (int jj = 0; jj < j; ++jj) {
        if (jj == leave_out) continue;
        const auto g = static_cast<std::size_t>(gid(a, jj));
        fr += frob[g];
        c += cy[g];
        size += count[g];
      }
      if (size == 0) throw InputError("jackknife block empties partition " + std::to_string(a));
      mk[static_cast<std::size_t>(a)] = static_cast<double>(size);
      if (leave_out >= 0) sys.m_k_minus[static_cast<std::size_t>(a)][static_cast<std::size_t>(leave_out)] = size;
      ls.lhs(a, k) = ls.lhs(k, a) = fr / mk[static_cast<std::size_t>(a)];
      ls.rhs(a) = c / mk[static_cast<std::size_t>(a)];
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        double num = s_total(a, b);
        if (leave_out >= 0) {
          num -= row_sum(gid(a, leave_out), b);
          num -= row_sum(gid(b, leave_out), a);  // s is symmetric
          num += s(gid(a, leave_out), gid(b, leave_out));
        }
        ls.lhs(a, b) = num / (mk[static_cast<std::size_t>(a)] * mk[static_cast<std::size_t>(b)]);
      }
    }
    const Eigen::MatrixXd t = ls.lhs.topLeftCorner(k, k);
    ls.lhs.topLeftCorner(k, k) = 0.5 * (t + t.transpose());
    ls.lhs(k, k) = corner;
    ls.rhs(k) = rhs_last;
    return ls;
  };

  sys.full = build(-1);
  if (j >= 2) {
    sys.variants.reserve(static_cast<std::size_t>(j));
    for (int jj = 0; jj < j; ++jj) sys.variants.push_back(build(jj));
  } else {
    for (int a = 0; a < k; ++a) sys.m_k_minus[static_cast<std::size_t>(a)][0] = sys.m_k[static_cast<std::size_t>(a)];
  }
  return sys;
}

NormalEquationSystem exact_trace_system(const GenotypeSource& src, const CovariateBasis& basis,
                                        const SyntheticDecomposition& syn) {
  const auto n = static_cast<Eigen::Index>(src.n_subjects());
  const auto m = static_cast<Eigen::Index>(src.n_snps());
  check_guard(n, m);
  Eigen::MatrixXd x(n, m);
  std::vector<int> parts(static_cast<std::size_t>(m)), blocks(static_cast<std::size_t>(m));
  src.stream_blocks([&](const GenotypeBlock& blk) {
    const auto begin = static_cast<Eigen::Index>(blk.begin);
    x.middleCols(begin, blk.x.cols()) = blk.x;
    std::copy(blk.partitions.begin(), blk.partitions.end(), parts.begin() + begin);
    std::copy(blk.jackknife_blocks.begin(), blk.jackknife_blocks.end(), blocks.begin() + begin);
  });
  return exact_trace_system(x, parts, src.n_partitions(), blocks, src.n_jackknife_blocks(), basis, syn);
}

}  // namespace cvc
