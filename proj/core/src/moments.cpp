#include "cvc/moments.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "cvc/error.hpp"

namespace cvc {

namespace {

constexpr int kScalarCount = 7;  // frob, lev, r, f, v, qy, qpy

struct GroupContribution {
  std::size_t group = 0;
  std::size_t count = 0;
  double scalars[kScalarCount] = {};
  Eigen::MatrixXd product;  // N x (2B + 1): X_g X_g^T [Z, Z~, y1]
};

void check_sizes(Eigen::Index n, const CovariateBasis& basis, const SyntheticDecomposition& syn,
                 const ProbeSet& probes) {
  if (basis.n() != n || syn.size() != n || probes.z.rows() != n ||
      probes.z_tilde.rows() != n || probes.z_tilde2.rows() != n) {
    throw InputError("subject counts differ between genotypes (" + std::to_string(n) +
                     "), covariates, phenotype and probes");
  }
}

}  // namespace

ProbeSet make_probes(Eigen::Index n, Eigen::Index b, const CovariateBasis& basis,
                     const Eigen::VectorXd& d, std::uint64_t seed) {
  if (b < 1) throw InputError("need at least one probe vector");
  if (basis.n() != n || d.size() != n) throw InputError("make_probes: dimension mismatch");
  ProbeSet p;
  p.seed = seed;
  p.weight = 1.0 / static_cast<double>(b);
  p.z.resize(n, b);
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < b; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) p.z(i, c) = normal(rng);
  }
  p.z_tilde = project_onto(basis, p.z);
  if (basis.rank() == 0) {
    p.z_tilde2 = Eigen::MatrixXd::Zero(n, b);
  } else {
    const Eigen::MatrixXd h_bar = d.asDiagonal() * basis.h();
    p.z_tilde2 = basis.h() * (h_bar.transpose() * p.z);
  }
  return p;
}

ProbeSet make_identity_probes(Eigen::Index n, const CovariateBasis& basis,
                              const Eigen::VectorXd& d) {
  if (basis.n() != n || d.size() != n) throw InputError("make_identity_probes: dimension mismatch");
  ProbeSet p;
  p.weight = 1.0;
  p.z = Eigen::MatrixXd::Identity(n, n);
  p.z_tilde = project_onto(basis, p.z);
  if (basis.rank() == 0) {
    p.z_tilde2 = Eigen::MatrixXd::Zero(n, n);
  } else {
    p.z_tilde2 = basis.h() * (d.asDiagonal() * basis.h()).transpose();
  }
  return p;
}

std::size_t WorkingArrays::block_bytes(int k, int j, Eigen::Index n, Eigen::Index b) {
  return 2 * static_cast<std::size_t>(k) * static_cast<std::size_t>(j) *
         static_cast<std::size_t>(n) * static_cast<std::size_t>(b) * sizeof(double);
}

WorkingArrays accumulate(const GenotypeSource& src, const CovariateBasis& basis,
                         const SyntheticDecomposition& syn, const ProbeSet& probes,
                         const AccumulateOptions& opts) {
  const auto n = static_cast<Eigen::Index>(src.n_subjects());
  check_sizes(n, basis, syn, probes);

  WorkingArrays arr;
  arr.k = src.n_partitions();
  arr.j = src.n_jackknife_blocks();
  arr.n = n;
  arr.b = probes.count();
  const Eigen::Index b = arr.b;
  const Eigen::Index r = basis.rank();
  const std::size_t groups = static_cast<std::size_t>(arr.k) * static_cast<std::size_t>(arr.j);

  arr.count.assign(groups, 0);
  for (auto* v : {&arr.frob, &arr.lev, &arr.r, &arr.f, &arr.v, &arr.qy, &arr.qpy}) {
    v->assign(groups, 0.0);
  }
  const bool spill = opts.force_spill ||
                     WorkingArrays::block_bytes(arr.k, arr.j, n, b) > opts.scratch.memory_budget;
  arr.block_z = ScratchArray("block_probe_products", groups, n, b, spill, opts.scratch);
  arr.block_z_tilde =
      ScratchArray("block_projected_probe_products", groups, n, b, spill, opts.scratch);
  arr.q_total.assign(static_cast<std::size_t>(arr.k), Eigen::VectorXd::Zero(n));

  // Right-hand sides shared by every block: [Z, Z~, y1 | H, D H, P y1].
  const Eigen::Index wide = 2 * b + 1;
  Eigen::MatrixXd rhs(n, wide + 2 * r + 1);
  rhs.leftCols(b) = probes.z;
  rhs.middleCols(b, b) = probes.z_tilde;
  rhs.col(2 * b) = syn.y1;
  if (r > 0) {
    rhs.middleCols(wide, r) = basis.h();
    rhs.middleCols(wide + r, r) = syn.d.asDiagonal() * basis.h();
  }
  rhs.col(wide + 2 * r) = project_onto(basis, syn.y1);

  std::mutex merge_mutex;
  std::condition_variable merge_cv;
  std::size_t next_merge = 0;
  bool aborted = false;

  auto merge = [&](std::vector<GroupContribution>& parts) {
    for (auto& part : parts) {
      const std::size_t g = part.group;
      arr.count[g] += part.count;
      arr.frob[g] += part.scalars[0];
      arr.lev[g] += part.scalars[1];
      arr.r[g] += part.scalars[2];
      arr.f[g] += part.scalars[3];
      arr.v[g] += part.scalars[4];
      arr.qy[g] += part.scalars[5];
      arr.qpy[g] += part.scalars[6];
      arr.block_z.slab(g) += part.product.leftCols(b);
      arr.block_z_tilde.slab(g) += part.product.middleCols(b, b);
      arr.q_total[g / static_cast<std::size_t>(arr.j)] += part.product.col(2 * b);
    }
  };

  auto visit = [&](const GenotypeBlock& blk) {
    const Eigen::MatrixXd& x = blk.x;
    const Eigen::Index w = x.cols();
    const Eigen::MatrixXd cross = x.transpose() * rhs;  // w x (wide + 2r + 1)

    std::vector<std::size_t> col_group(static_cast<std::size_t>(w));
    std::vector<std::size_t> distinct;
    for (Eigen::Index c = 0; c < w; ++c) {
      const auto g = arr.group(blk.partitions[static_cast<std::size_t>(c)],
                               blk.jackknife_blocks[static_cast<std::size_t>(c)]);
      col_group[static_cast<std::size_t>(c)] = g;
      if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
    }

    std::vector<GroupContribution> parts(distinct.size());
    for (std::size_t p = 0; p < distinct.size(); ++p) parts[p].group = distinct[p];
    auto part_of = [&](std::size_t g) -> GroupContribution& {
      return parts[static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), g) - distinct.begin())];
    };

    for (Eigen::Index c = 0; c < w; ++c) {
      GroupContribution& part = part_of(col_group[static_cast<std::size_t>(c)]);
      const auto xc = x.col(c);
      const auto row = cross.row(c);
      const double qy = row(2 * b);
      const double qpy = row(wide + 2 * r);
      part.count += 1;
      part.scalars[0] += xc.squaredNorm();
      if (r > 0) {
        part.scalars[1] += row.segment(wide, r).squaredNorm();
        part.scalars[2] += row.segment(wide, r).dot(row.segment(wide + r, r));
      }
      part.scalars[3] += (xc.array().square() * syn.d.array()).sum();
      part.scalars[4] += qpy * qpy;
      part.scalars[5] += qy * qy;
      part.scalars[6] += qy * qpy;
    }

    if (distinct.size() == 1) {
      parts[0].product.noalias() = x * cross.leftCols(wide);
    } else {
      for (auto& part : parts) {
        Eigen::MatrixXd xg(n, static_cast<Eigen::Index>(part.count));
        Eigen::MatrixXd cg(static_cast<Eigen::Index>(part.count), wide);
        Eigen::Index at = 0;
        for (Eigen::Index c = 0; c < w; ++c) {
          if (col_group[static_cast<std::size_t>(c)] != part.group) continue;
          xg.col(at) = x.col(c);
          cg.row(at) = cross.row(c).head(wide);
          ++at;
        }
        part.product.noalias() = xg * cg;
      }
    }

    std::unique_lock lock(merge_mutex);
    if (opts.strict_deterministic) {
      merge_cv.wait(lock, [&] { return aborted || next_merge == blk.index; });
      if (aborted) return;
    }
    try {
      merge(parts);
    } catch (...) {
      aborted = true;
      merge_cv.notify_all();
      throw;
    }
    ++next_merge;
    merge_cv.notify_all();
  };

  try {
    src.stream_blocks(visit, opts.threads);
  } catch (...) {
    {
      std::lock_guard lock(merge_mutex);
      aborted = true;
    }
    merge_cv.notify_all();
    throw;
  }

  arr.u_total.assign(static_cast<std::size_t>(arr.k), Eigen::MatrixXd::Zero(n, b));
  arr.u_tilde_total.assign(static_cast<std::size_t>(arr.k), Eigen::MatrixXd::Zero(n, b));
  for (int kk = 0; kk < arr.k; ++kk) {
    for (int jj = 0; jj < arr.j; ++jj) {
      arr.u_total[static_cast<std::size_t>(kk)] += arr.block_z.slab(arr.group(kk, jj));
      arr.u_tilde_total[static_cast<std::size_t>(kk)] += arr.block_z_tilde.slab(arr.group(kk, jj));
    }
  }
  return arr;
}

double trace_projected_diag(const CovariateBasis& basis, const Eigen::VectorXd& d) {
  if (basis.rank() == 0) return 0.0;
  return basis.leverages().dot(d);
}

double trace_synthetic_complement(const CovariateBasis& basis, const SyntheticDecomposition& syn) {
  double quad = 0.0;
  if (basis.rank() > 0) quad = (basis.h().transpose() * syn.y1).squaredNorm();
  return syn.y2.sum() - trace_projected_diag(basis, syn.d) - quad;
}

NormalEquationSystem assemble_system(const WorkingArrays& arr, const SyntheticDecomposition& syn,
                                     const CovariateBasis& basis, const ProbeSet& probes) {
  const Eigen::Index n = arr.n;
  check_sizes(n, basis, syn, probes);
  if (probes.count() != arr.b) throw InputError("probe count differs from working arrays");
  const int kk_count = arr.k;
  const int jj_count = arr.j;
  const auto K = static_cast<std::size_t>(kk_count);

  NormalEquationSystem sys;
  sys.n = n;
  sys.rank = basis.rank();
  sys.m_k.assign(K, 0);
  sys.m_k_minus.assign(K, std::vector<std::size_t>(static_cast<std::size_t>(jj_count), 0));
  for (int k = 0; k < kk_count; ++k) {
    for (int j = 0; j < jj_count; ++j) sys.m_k[static_cast<std::size_t>(k)] += arr.count[arr.group(k, j)];
    if (sys.m_k[static_cast<std::size_t>(k)] == 0) {
      throw InputError("partition " + std::to_string(k) + " has no SNPs");
    }
  }

  const double rhs_last = trace_synthetic_complement(basis, syn);
  const double corner = static_cast<double>(n - basis.rank());

  auto total = [&](const std::vector<double>& v, int k) {
    double s = 0.0;
    for (int j = 0; j < jj_count; ++j) s += v[arr.group(k, j)];
    return s;
  };

  // leave_out < 0 builds the full system.
  auto build = [&](int leave_out) {
    LinearSystem ls;
    ls.lhs = Eigen::MatrixXd::Zero(kk_count + 1, kk_count + 1);
    ls.rhs = Eigen::VectorXd::Zero(kk_count + 1);

    std::vector<double> m(K);
    std::vector<Eigen::MatrixXd> left(K), right(K);
    for (int k = 0; k < kk_count; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      auto minus = [&](const std::vector<double>& v) {
        return total(v, k) - (leave_out >= 0 ? v[arr.group(k, leave_out)] : 0.0);
      };
      std::size_t mk = sys.m_k[ks];
      Eigen::MatrixXd u = arr.u_total[ks];
      Eigen::MatrixXd ut = arr.u_tilde_total[ks];
      if (leave_out >= 0) {
        const std::size_t g = arr.group(k, leave_out);
        mk -= arr.count[g];
        u -= arr.block_z.slab(g);
        ut -= arr.block_z_tilde.slab(g);
      }
      if (mk == 0) throw InputError("jackknife block empties partition " + std::to_string(k));
      m[ks] = static_cast<double>(mk);

      // U - U~ = X X^T V Z  and  V U = V X X^T Z
      left[ks] = u - ut;
      right[ks] = project_out(basis, u);

      const double frob = minus(arr.frob), lev = minus(arr.lev);
      const double tr_ky = minus(arr.qy) + minus(arr.f);
      const double tr_kpy = minus(arr.r) + minus(arr.qpy);
      const double tr_pkpy = probes.weight * ut.cwiseProduct(probes.z_tilde2).sum() + minus(arr.v);
      ls.lhs(k, kk_count) = ls.lhs(kk_count, k) = (frob - lev) / m[ks];
      ls.rhs(k) = (tr_ky - 2.0 * tr_kpy + tr_pkpy) / m[ks];
    }
    for (int k = 0; k < kk_count; ++k) {
      for (int l = 0; l < kk_count; ++l) {
        const auto ks = static_cast<std::size_t>(k), ls_ = static_cast<std::size_t>(l);
        ls.lhs(k, l) = probes.weight * left[ks].cwiseProduct(right[ls_]).sum() / (m[ks] * m[ls_]);
      }
    }
    const Eigen::MatrixXd t = ls.lhs.topLeftCorner(kk_count, kk_count);
    ls.lhs.topLeftCorner(kk_count, kk_count) = 0.5 * (t + t.transpose());
    ls.lhs(kk_count, kk_count) = corner;
    ls.rhs(kk_count) = rhs_last;

    if (leave_out >= 0) {
      for (int k = 0; k < kk_count; ++k) {
        sys.m_k_minus[static_cast<std::size_t>(k)][static_cast<std::size_t>(leave_out)] =
            static_cast<std::size_t>(m[static_cast<std::size_t>(k)]);
      }
    }
    return ls;
  };

  sys.full = build(-1);
  if (jj_count >= 2) {
    sys.variants.reserve(static_cast<std::size_t>(jj_count));
    for (int j = 0; j < jj_count; ++j) sys.variants.push_back(build(j));
  } else {
    for (int k = 0; k < kk_count; ++k) sys.m_k_minus[static_cast<std::size_t>(k)][0] = sys.m_k[static_cast<std::size_t>(k)];
  }
  return sys;
}

}  // namespace cvc
