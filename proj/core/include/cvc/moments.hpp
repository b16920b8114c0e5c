#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cvc/censoring.hpp"
#include "cvc/genotype.hpp"
#include "cvc/projection.hpp"
#include "cvc/scratch.hpp"

namespace cvc {

inline constexpr int kDefaultProbes = 10;
inline constexpr int kDefaultJackknifeBlocks = 100;

/// Trace probes shared by every (k, l) pair and every jackknife variant.
///   z        N x B standard normal draws (or the identity for exact traces)
///   z_tilde  H H^T z
///   z_tilde2 H (D H)^T z
/// `weight` turns sums over probes into trace estimates: 1/B for Gaussian
/// probes, 1 for the identity.
struct ProbeSet {
  Eigen::MatrixXd z;
  Eigen::MatrixXd z_tilde;
  Eigen::MatrixXd z_tilde2;
  std::uint64_t seed = 0;
  double weight = 1.0;

  Eigen::Index count() const { return z.cols(); }
};

ProbeSet make_probes(Eigen::Index n, Eigen::Index b, const CovariateBasis& basis,
                     const Eigen::VectorXd& d, std::uint64_t seed);

/// Z = I_N. Every trace assembled from these probes is exact; meant for
/// small fixtures.
ProbeSet make_identity_probes(Eigen::Index n, const CovariateBasis& basis,
                              const Eigen::VectorXd& d);

struct AccumulateOptions {
  int threads = 1;
  // Merge block contributions in file order so that results do not depend on
  // thread scheduling.
  bool strict_deterministic = true;
  ScratchOptions scratch;
  bool force_spill = false;
};

/// Per-(partition, jackknife block) sums gathered in one pass over the
/// genotypes. Group g = k * J + j. With X_g the standardized columns of the
/// group, A_g = X_g^T H, P = H H^T:
///   frob[g]   ||X_g||_F^2
///   lev[g]    <A_g, A_g>                       (tr X_g^T P X_g)
///   r[g]      <A_g, X_g^T D H>                 (tr X_g X_g^T P D)
///   f[g]      <X_g, D X_g>
///   v[g]      ||X_g^T P y1||^2
///   qy[g]     ||X_g^T y1||^2                   (y1^T Q_g)
///   qpy[g]    (X_g^T y1) . (X_g^T P y1)        ((P y1)^T Q_g)
///   block_z[g]        X_g X_g^T Z
///   block_z_tilde[g]  X_g X_g^T Z~
/// Totals over j are formed once the pass ends.
struct WorkingArrays {
  int k = 0;
  int j = 0;
  Eigen::Index n = 0;
  Eigen::Index b = 0;

  std::vector<std::size_t> count;
  std::vector<double> frob, lev, r, f, v, qy, qpy;
  ScratchArray block_z;
  ScratchArray block_z_tilde;

  std::vector<Eigen::MatrixXd> u_total;        // per partition, N x B
  std::vector<Eigen::MatrixXd> u_tilde_total;  // per partition, N x B
  std::vector<Eigen::VectorXd> q_total;        // per partition, X_k X_k^T y1

  std::size_t group(int kk, int jj) const {
    return static_cast<std::size_t>(kk) * static_cast<std::size_t>(j) + static_cast<std::size_t>(jj);
  }
  /// Bytes of the two per-group N x B stacks.
  static std::size_t block_bytes(int k, int j, Eigen::Index n, Eigen::Index b);
};

/// Single pass over `src` accumulating every working array.
WorkingArrays accumulate(const GenotypeSource& src, const CovariateBasis& basis,
                         const SyntheticDecomposition& syn, const ProbeSet& probes,
                         const AccumulateOptions& opts = {});

struct LinearSystem {
  Eigen::MatrixXd lhs;  // (K+1) x (K+1)
  Eigen::VectorXd rhs;  // K+1
};

/// Normal equations for the variance components,
///   [ T    b     ] [sigma_g^2]   [ c          ]
///   [ b^T  N - r ] [sigma_e^2] = [ tr(Y* V)   ]
/// plus one leave-one-block-out system per jackknife block (none when J = 1).
struct NormalEquationSystem {
  LinearSystem full;
  std::vector<LinearSystem> variants;
  std::vector<std::size_t> m_k;
  std::vector<std::vector<std::size_t>> m_k_minus;  // [k][j]
  Eigen::Index n = 0;
  Eigen::Index rank = 0;

  int k() const { return static_cast<int>(m_k.size()); }
  int j() const { return static_cast<int>(variants.size()); }
};

NormalEquationSystem assemble_system(const WorkingArrays& arr, const SyntheticDecomposition& syn,
                                     const CovariateBasis& basis, const ProbeSet& probes);

/// Sum of d_i * ||H_i||^2, i.e. tr(H H^T D).
double trace_projected_diag(const CovariateBasis& basis, const Eigen::VectorXd& d);

/// tr(Y* V) = 1^T y2 - tr(H H^T D) - y1^T H H^T y1
double trace_synthetic_complement(const CovariateBasis& basis, const SyntheticDecomposition& syn);

// --- exact traces ---

inline constexpr std::size_t kExactTraceMaxEntries = 10'000'000;

/// Every trace computed exactly from the dense standardized genotypes via
/// the cross-products (V X_k)^T (V X_l); no probes. Requires N * M within
/// kExactTraceMaxEntries.
NormalEquationSystem exact_trace_system(const GenotypeSource& src, const CovariateBasis& basis,
                                        const SyntheticDecomposition& syn);

/// Same, for an in-memory standardized matrix with per-column labels.
NormalEquationSystem exact_trace_system(const Eigen::MatrixXd& x, std::span<const int> partitions,
                                        int k, std::span<const int> jackknife_blocks, int j,
                                        const CovariateBasis& basis,
                                        const SyntheticDecomposition& syn);

}  // namespace cvc
