#include "cvc/pipeline.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "cvc/error.hpp"
#include "cvc/projection.hpp"
#include "cvc/tables.hpp"

namespace cvc {

GenotypeSource with_jackknife(const GenotypeSource& src, int blocks, JackknifeMode mode) {
  if (blocks < 1) throw InputError("number of jackknife blocks must be positive");
  if (blocks >= 2 && mode == JackknifeMode::within_partition) {
    const auto sizes = src.partition_sizes();
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] < static_cast<std::size_t>(blocks)) {
        throw InputError("jackknife blocks (" + std::to_string(blocks) + ") exceed the " +
                         std::to_string(sizes[k]) + " SNP(s) of partition " + std::to_string(k));
      }
    }
  }
  return assign_jackknife_blocks(src, blocks, mode);
}

GenotypeSource compact_partitions(const GenotypeSource& src, std::vector<int>& labels) {
  const auto sizes = src.partition_sizes();
  std::vector<int> remap(sizes.size(), -1);
  labels.clear();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) continue;
    remap[k] = static_cast<int>(labels.size());
    labels.push_back(static_cast<int>(k));
  }
  std::vector<int> out(src.n_snps());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = remap[static_cast<std::size_t>(src.snps()[j].partition)];
  }
  return src.with_partitions(std::move(out), static_cast<int>(labels.size()));
}

NormalEquationSystem build_system(const GenotypeSource& src, const SyntheticDecomposition& syn,
                                  const CovariateBasis& basis, const FitOptions& opts,
                                  bool* spilled) {
  if (spilled) *spilled = false;
  if (opts.exact_trace) return exact_trace_system(src, basis, syn);
  if (opts.probes < 1) throw InputError("need at least one probe vector");
  const auto n = static_cast<Eigen::Index>(src.n_subjects());
  const ProbeSet probes = make_probes(n, opts.probes, basis, syn.d, opts.seed);
  AccumulateOptions acc;
  acc.threads = opts.threads;
  acc.strict_deterministic = opts.strict_deterministic;
  acc.scratch = opts.scratch;
  acc.force_spill = opts.force_spill;
  const WorkingArrays arr = accumulate(src, basis, syn, probes, acc);
  if (spilled) *spilled = arr.block_z.spilled();
  return assemble_system(arr, syn, basis, probes);
}

namespace {

FitResult fit_common(const std::string& method, const GenotypeSource& src_in,
                     std::span<const CensoredSample> samples, const Eigen::MatrixXd& w,
                     const FitOptions& opts) {
  const std::size_t n = src_in.n_subjects();
  if (samples.size() != n) {
    throw InputError("phenotype rows (" + std::to_string(samples.size()) +
                     ") differ from genotype subjects (" + std::to_string(n) + ")");
  }
  if (static_cast<std::size_t>(w.rows()) != n) throw InputError("covariate rows differ from genotype subjects");

  FitResult res;
  res.method = method;
  res.n = n;
  res.m = src_in.n_snps();
  res.k = src_in.n_partitions();
  res.censoring_rate = censoring_rate(samples);

  const GenotypeSource src = with_jackknife(src_in, opts.jackknife_blocks, opts.jackknife_mode);
  res.j = opts.jackknife_blocks;

  const CovariateBasis basis =
      w.cols() == 0 ? CovariateBasis::none(static_cast<Eigen::Index>(n)) : build_basis(w, opts.rank_tol);
  res.rank = basis.rank();

  SyntheticDecomposition syn;
  if (method == "lt") {
    Eigen::VectorXd delta(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) delta(static_cast<Eigen::Index>(i)) = samples[i].event ? 1.0 : 0.0;
    syn = raw_moments(delta);
  } else {
    res.cdf = fit_censoring_cdf(samples, opts.cdf_cap.value_or(default_cdf_cap(n)));
    syn = build_synthetic(samples, res.cdf);
  }

  src.reset_io_stats();
  res.system = build_system(src, syn, basis, opts, &res.spilled);
  res.io = src.io_stats();

  const ComponentFit fit = solve_components(res.system);
  const double scale = syn.y2.cwiseAbs().mean();
  res.report = to_heritability(fit, 1e-10 * scale);
  if (method == "lt") res.report = lt_convert(res.report, res.censoring_rate);
  return res;
}

}  // namespace

FitResult fit_cvc(const GenotypeSource& src, std::span<const CensoredSample> samples,
                  const Eigen::MatrixXd& w, const FitOptions& opts) {
  return fit_common("cvc", src, samples, w, opts);
}

FitResult fit_lt(const GenotypeSource& src, std::span<const CensoredSample> samples,
                 const Eigen::MatrixXd& w, const FitOptions& opts) {
  return fit_common("lt", src, samples, w, opts);
}

Dataset load_dataset(const DatasetSpec& spec) {
  const PhenotypeTable pheno = read_phenotypes(spec.phenotype, spec.pre_logged);
  std::optional<CovariateTable> covar;
  if (spec.covariates) covar = read_covariates(*spec.covariates);

  std::unordered_set<std::string> keep(pheno.ids.begin(), pheno.ids.end());
  if (covar) {
    std::unordered_set<std::string> in_covar(covar->ids.begin(), covar->ids.end());
    std::erase_if(keep, [&](const std::string& id) { return !in_covar.count(id); });
  }
  if (keep.empty()) throw InputError("phenotype and covariate files share no subject ids");

  Dataset ds;
  GenotypeSource src;
  try {
    src = GenotypeSource::open(spec.genotypes, std::vector<std::string>(keep.begin(), keep.end()),
                               spec.block_width);
  } catch (const InputError& e) {
    if (std::string(e.what()).rfind("no subjects retained", 0) == 0) {
      throw InputError("empty subject intersection between genotype, phenotype and covariate files");
    }
    throw;
  }

  auto& sum = ds.summary;
  sum.phenotype_rows = pheno.ids.size();
  sum.covariate_rows = covar ? covar->ids.size() : 0;
  sum.genotype_subjects = src.load_summary().subjects_in_file;
  sum.subjects_used = src.n_subjects();
  {
    std::unordered_set<std::string> all(pheno.ids.begin(), pheno.ids.end());
    if (covar) all.insert(covar->ids.begin(), covar->ids.end());
    std::unordered_set<std::string> used(src.subject_ids().begin(), src.subject_ids().end());
    for (const auto& id : all) sum.subjects_dropped += !used.count(id);
  }
  sum.snps_in_file = src.load_summary().snps_in_file;
  sum.dropped_snps = src.load_summary().dropped_snps;
  sum.warnings = src.load_summary().warnings;

  ds.ids = src.subject_ids();
  const auto n = static_cast<Eigen::Index>(ds.ids.size());
  std::unordered_map<std::string, std::size_t> pheno_row;
  for (std::size_t i = 0; i < pheno.ids.size(); ++i) pheno_row[pheno.ids[i]] = i;
  for (const auto& id : ds.ids) ds.samples.push_back(pheno.samples[pheno_row.at(id)]);

  const Eigen::Index c = covar ? covar->values.cols() : 0;
  ds.w.resize(n, c + 1);
  ds.w.col(0).setOnes();
  ds.covariate_names.push_back("intercept");
  if (covar) {
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < covar->ids.size(); ++i) row[covar->ids[i]] = i;
    for (Eigen::Index i = 0; i < n; ++i) {
      ds.w.row(i).tail(c) = covar->values.row(static_cast<Eigen::Index>(row.at(ds.ids[static_cast<std::size_t>(i)])));
    }
    ds.covariate_names.insert(ds.covariate_names.end(), covar->names.begin(), covar->names.end());
  }

  switch (spec.partitions) {
    case PartitionSource::single:
      break;
    case PartitionSource::contiguous:
      src = assign_contiguous_partitions(src, spec.contiguous_k);
      break;
    case PartitionSource::annotation: {
      if (!spec.annotations) throw InputError("annotation partitioning needs an annotation file");
      const AnnotationTable annot = read_annotations(*spec.annotations);
      if (annot.has_partition) {
        PartitionScheme scheme;
        scheme.mode = PartitionMode::explicit_file;
        for (std::size_t i = 0; i < annot.ids.size(); ++i) scheme.assignments[annot.ids[i]] = annot.partition[i];
        src = assign_partitions(src, scheme);
      } else {
        std::unordered_map<std::string, std::size_t> row;
        for (std::size_t i = 0; i < annot.ids.size(); ++i) row[annot.ids[i]] = i;
        std::vector<double> maf, ldak;
        std::vector<std::string> missing;
        for (const auto& snp : src.snps()) {
          auto it = row.find(snp.id);
          if (it == row.end()) {
            missing.push_back(snp.id);
            continue;
          }
          maf.push_back(annot.maf[it->second]);
          ldak.push_back(annot.ldak[it->second]);
        }
        if (!missing.empty()) {
          std::string msg = std::to_string(missing.size()) + " SNP(s) missing from annotation file: ";
          for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
            msg += (i ? ", " : "") + missing[i];
          }
          throw InputError(msg);
        }
        PartitionScheme scheme = spec.grid;
        scheme.mode = PartitionMode::ld_maf_grid;
        src = assign_partitions(src, scheme, maf, ldak);
      }
      break;
    }
  }

  sum.partitions_requested = src.n_partitions();
  ds.src = compact_partitions(src, ds.partition_labels);
  {
    std::size_t at = 0;
    for (int p = 0; p < sum.partitions_requested; ++p) {
      if (at < ds.partition_labels.size() && ds.partition_labels[at] == p) {
        ++at;
      } else {
        sum.empty_partitions.push_back(p);
      }
    }
  }
  if (!sum.empty_partitions.empty()) {
    sum.warnings.push_back(std::to_string(sum.empty_partitions.size()) + " of " +
                           std::to_string(sum.partitions_requested) + " partitions are empty");
  }
  return ds;
}

Footprint estimate_footprint(std::size_t n, std::size_t m, int k, int j, int b,
                             std::size_t block_width, std::size_t memory_budget) {
  const std::size_t d = sizeof(double);
  const auto kk = static_cast<std::size_t>(k), jj = static_cast<std::size_t>(j),
             bb = static_cast<std::size_t>(b);
  const std::size_t working = 2 * kk * jj * n * bb * d;
  const std::size_t totals = 2 * kk * n * bb * d + kk * n * d;
  const std::size_t probes = 3 * n * bb * d + n * (2 * bb + 8) * d;
  const std::size_t block = n * std::min(block_width, m) * d * 3;
  Footprint fp;
  fp.scratch_bytes = working > memory_budget ? working : 0;
  fp.ram_bytes = totals + probes + block + (fp.scratch_bytes ? 0 : working);
  return fp;
}

}  // namespace cvc
