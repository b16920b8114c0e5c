#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvc/censoring.hpp"
#include "cvc/error.hpp"
#include "cvc/genotype.hpp"
#include "cvc/pipeline.hpp"
#include "cvc/report.hpp"
#include "cvc/simulate.hpp"
#include "cvc/tables.hpp"

namespace fs = std::filesystem;

namespace {

struct Config {
  std::string bfile, bed, bim, fam;
  std::string pheno, covar, annot;
  bool pre_logged = false;
  int k_contiguous = 0;
  std::vector<double> maf_knots{0.01, 0.02, 0.03, 0.04, 0.05};
  int ld_quantiles = 4;
  int probes = cvc::kDefaultProbes;
  int jackknife = cvc::kDefaultJackknifeBlocks;
  std::string jackknife_mode = "within";
  std::uint64_t seed = 1;
  bool exact_trace = false;
  int threads = 1;
  bool relaxed = false;
  std::string memory_budget;
  std::string scratch_dir;
  bool keep_scratch = false;
  double cap = 0.0;
  std::size_t block_width = 512;
  std::string out;
};

struct SimConfig {
  std::size_t n = 5000, m = 2000;
  int k = 5;
  int covariates = 9;
  double rho = 0.1, h2 = 0.5, rate = 0.2;
  std::string mode = "correct";
  double a = 0.0, b = 0.0, cvr = 1.0, maf_low = 0.0, maf_high = 0.5;
  std::string errors = "normal";
  std::string ldak;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
};

void log(const std::string& msg) { std::cerr << "cvc: " << msg << '\n'; }

std::size_t parse_bytes(const std::string& text) {
  if (text.empty()) throw cvc::InputError("empty memory size");
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw cvc::InputError("invalid memory size '" + text + "'");
  }
  std::string unit = text.substr(pos);
  double mult = 1.0;
  if (unit.empty() || unit == "B") mult = 1.0;
  else if (unit == "K" || unit == "KiB") mult = 1024.0;
  else if (unit == "M" || unit == "MiB") mult = 1024.0 * 1024.0;
  else if (unit == "G" || unit == "GiB") mult = 1024.0 * 1024.0 * 1024.0;
  else throw cvc::InputError("invalid memory unit '" + unit + "'");
  if (!(v >= 0.0)) throw cvc::InputError("invalid memory size '" + text + "'");
  return static_cast<std::size_t>(v * mult);
}

cvc::BedPaths bed_paths(const Config& c) {
  cvc::BedPaths p;
  if (!c.bfile.empty()) p = cvc::BedPaths::from_prefix(c.bfile);
  if (!c.bed.empty()) p.bed = c.bed;
  if (!c.bim.empty()) p.bim = c.bim;
  if (!c.fam.empty()) p.fam = c.fam;
  if (p.bed.empty() || p.bim.empty() || p.fam.empty()) {
    throw cvc::InputError("genotype files not given (use --bfile or --bed/--bim/--fam)");
  }
  return p;
}

cvc::DatasetSpec dataset_spec(const Config& c) {
  cvc::DatasetSpec s;
  s.genotypes = bed_paths(c);
  s.phenotype = c.pheno;
  if (!c.covar.empty()) s.covariates = fs::path(c.covar);
  if (!c.annot.empty()) {
    s.annotations = fs::path(c.annot);
    s.partitions = cvc::PartitionSource::annotation;
  } else if (c.k_contiguous > 0) {
    s.partitions = cvc::PartitionSource::contiguous;
    s.contiguous_k = c.k_contiguous;
  }
  s.pre_logged = c.pre_logged;
  s.grid.maf_knots = c.maf_knots;
  s.grid.ld_quantiles = c.ld_quantiles;
  s.block_width = c.block_width;
  return s;
}

cvc::FitOptions fit_options(const Config& c) {
  cvc::FitOptions o;
  o.probes = c.probes;
  o.jackknife_blocks = c.jackknife;
  o.jackknife_mode = c.jackknife_mode == "global" ? cvc::JackknifeMode::global
                                                  : cvc::JackknifeMode::within_partition;
  o.seed = c.seed;
  o.exact_trace = c.exact_trace;
  o.threads = c.threads;
  o.strict_deterministic = !c.relaxed;
  if (const char* env = std::getenv("CVC_MEMORY_BUDGET"); env && *env) o.scratch.memory_budget = parse_bytes(env);
  if (!c.memory_budget.empty()) o.scratch.memory_budget = parse_bytes(c.memory_budget);
  if (const char* env = std::getenv("CVC_SCRATCH_DIR"); env && *env) o.scratch.dir = env;
  if (!c.scratch_dir.empty()) o.scratch.dir = c.scratch_dir;
  o.scratch.keep = c.keep_scratch;
  if (c.cap > 0.0) o.cdf_cap = c.cap;
  return o;
}

void add_input_options(CLI::App* app, Config& c, bool need_pheno = true) {
  app->add_option("--bfile", c.bfile, "Prefix of the .bed/.bim/.fam triplet");
  app->add_option("--bed", c.bed, "Genotype .bed file");
  app->add_option("--bim", c.bim, "Variant .bim file");
  app->add_option("--fam", c.fam, "Subject .fam file");
  auto* p = app->add_option("--pheno", c.pheno, "Phenotype TSV (id, time, status)");
  if (need_pheno) p->required();
  app->add_option("--covar", c.covar, "Covariate TSV (id + numeric columns)");
  app->add_option("--annot", c.annot, "SNP annotation TSV (id, partition) or (id, maf, ldak)");
  app->add_option("-K,--partitions", c.k_contiguous, "Split SNPs into K contiguous partitions");
  app->add_option("--maf-knots", c.maf_knots, "MAF knots of the LD-MAF grid");
  app->add_option("--ld-quantiles", c.ld_quantiles, "LD bins of the LD-MAF grid");
  app->add_flag("--pre-logged", c.pre_logged, "Phenotype time is already on the log scale");
  app->add_option("--block-width", c.block_width, "SNPs decoded per block")->check(CLI::PositiveNumber);
}

void add_fit_options(CLI::App* app, Config& c) {
  app->add_option("-B,--probes", c.probes, "Random probe vectors")->check(CLI::PositiveNumber);
  app->add_option("-J,--jackknife", c.jackknife, "Jackknife blocks")->check(CLI::PositiveNumber);
  app->add_option("--jackknife-mode", c.jackknife_mode, "within | global")
      ->check(CLI::IsMember({"within", "global"}));
  app->add_option("--seed", c.seed, "Probe seed");
  app->add_flag("--exact-trace", c.exact_trace, "Exact traces from dense genotypes (small data only)");
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--relaxed", c.relaxed, "Merge blocks in completion order (not bit-reproducible)");
  app->add_option("--memory-budget", c.memory_budget, "Bytes of working arrays kept in RAM (K/M/G suffix)");
  app->add_option("--scratch-dir", c.scratch_dir, "Directory for spilled working arrays");
  app->add_flag("--keep-scratch", c.keep_scratch, "Keep spilled working arrays");
  app->add_option("--cap", c.cap, "Clamp for the censoring CDF (default 1 - 1/(2N))");
  app->add_option("-o,--out", c.out, "Output prefix (.json and .tsv)")->required();
}

cvc::RunMetadata metadata(const std::string& command, const Config& c) {
  cvc::RunMetadata m;
  m.command = command;
  m.seed = c.seed;
  m.probes = c.probes;
  m.jackknife_blocks = c.jackknife;
  m.jackknife_mode = c.jackknife_mode;
  m.exact_trace = c.exact_trace;
  m.threads = c.threads;
  m.strict_deterministic = !c.relaxed;
  const auto paths = bed_paths(c);
  m.inputs = {{"bed", paths.bed.string()}, {"phenotype", c.pheno}};
  if (!c.covar.empty()) m.inputs.emplace_back("covariates", c.covar);
  if (!c.annot.empty()) m.inputs.emplace_back("annotations", c.annot);
  return m;
}

int run_estimate(const Config& c, bool lt) {
  const cvc::Dataset ds = cvc::load_dataset(dataset_spec(c));
  for (const auto& w : ds.summary.warnings) log("warning: " + w);
  const double rate = cvc::censoring_rate(ds.samples);
  log("N=" + std::to_string(ds.src.n_subjects()) + " M=" + std::to_string(ds.src.n_snps()) +
      " K=" + std::to_string(ds.src.n_partitions()) + " censoring rate=" + std::to_string(rate));
  const cvc::FitOptions opts = fit_options(c);
  const cvc::FitResult fit = lt ? cvc::fit_lt(ds.src, ds.samples, ds.w, opts)
                                : cvc::fit_cvc(ds.src, ds.samples, ds.w, opts);
  const std::string json =
      cvc::report_json(fit, metadata(lt ? "estimate-lt" : "estimate", c), ds.partition_labels, &ds.summary);
  const std::string tsv = cvc::report_tsv(fit, ds.partition_labels);
  cvc::write_text(c.out + ".json", json);
  cvc::write_text(c.out + ".tsv", tsv);
  log("h2=" + std::to_string(fit.report.h2_total) + " se=" + std::to_string(fit.report.se_total));
  return 0;
}

int run_km(const Config& c) {
  const cvc::PhenotypeTable pheno = cvc::read_phenotypes(c.pheno, c.pre_logged);
  const double cap = c.cap > 0.0 ? c.cap : cvc::default_cdf_cap(pheno.samples.size());
  const cvc::CensoringCdf cdf = cvc::fit_censoring_cdf(pheno.samples, cap);
  if (cdf.empty()) log("note: no censored observations; the censoring CDF is identically zero");
  const std::string table = cvc::cdf_tsv(cdf);
  if (c.out.empty() || c.out == "-") {
    std::cout << table;
  } else {
    cvc::write_text(c.out, table);
  }
  return 0;
}

int run_check(const Config& c) {
  const cvc::Dataset ds = cvc::load_dataset(dataset_spec(c));
  const auto& sum = ds.summary;
  nlohmann::ordered_json out;
  out["n_subjects"] = ds.src.n_subjects();
  out["n_snps"] = ds.src.n_snps();
  out["n_partitions"] = ds.src.n_partitions();
  out["partitions_requested"] = sum.partitions_requested;
  out["empty_partitions"] = sum.empty_partitions;
  out["subjects_dropped"] = sum.subjects_dropped;
  out["snps_dropped"] = sum.dropped_snps.size();
  out["censoring_rate"] = cvc::censoring_rate(ds.samples);

  std::vector<std::size_t> spectrum(c.maf_knots.size() + 1, 0);
  for (const auto& snp : ds.src.snps()) {
    const double f = snp.maf();
    ++spectrum[static_cast<std::size_t>(std::upper_bound(c.maf_knots.begin(), c.maf_knots.end(), f) -
                                        c.maf_knots.begin())];
  }
  out["maf_knots"] = c.maf_knots;
  out["maf_spectrum"] = spectrum;
  nlohmann::ordered_json occupancy = nlohmann::ordered_json::array();
  const auto sizes = ds.src.partition_sizes();
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    occupancy.push_back({{"partition", ds.partition_labels[k]}, {"n_snps", sizes[k]}});
  }
  out["partition_occupancy"] = occupancy;

  const cvc::FitOptions opts = fit_options(c);
  cvc::with_jackknife(ds.src, opts.jackknife_blocks, opts.jackknife_mode);

  const cvc::Footprint fp = cvc::estimate_footprint(ds.src.n_subjects(), ds.src.n_snps(),
                                                    ds.src.n_partitions(), opts.jackknife_blocks,
                                                    opts.probes, c.block_width,
                                                    opts.scratch.memory_budget);
  out["predicted_peak_ram_bytes"] = fp.ram_bytes;
  out["predicted_scratch_bytes"] = fp.scratch_bytes;

  std::vector<std::string> findings = sum.warnings;
  out["findings"] = findings;
  out["status"] = findings.empty() ? "ok" : "warnings";
  const std::string text = out.dump(2) + "\n";
  for (const auto& f : findings) log("warning: " + f);
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
  } else {
    cvc::write_text(c.out, text);
  }
  return 0;
}

int run_simulate(const SimConfig& s) {
  if (s.out.empty()) throw cvc::InputError("--out is required");
  cvc::GenotypeSimConfig gcfg;
  gcfg.n = s.n;
  gcfg.m = s.m;
  gcfg.rho = s.rho;
  gcfg.seed = s.seed;
  gcfg.threads = s.threads;
  const cvc::BedPaths paths = cvc::BedPaths::from_prefix(s.out);
  const cvc::SimulatedGenotypes geno = cvc::write_simulated_genotypes(gcfg, paths);

  cvc::GenotypeSource src = cvc::GenotypeSource::open(paths);
  if (src.n_snps() != s.m) {
    throw cvc::InputError("simulated genotypes contain monomorphic SNPs; increase --n");
  }
  src = cvc::assign_contiguous_partitions(src, s.k);

  std::vector<double> ldak(s.m, 1.0);
  if (!s.ldak.empty()) {
    const cvc::AnnotationTable t = cvc::read_annotations(s.ldak);
    if (!t.has_grid || t.ids.size() != s.m) throw cvc::InputError("--ldak needs id, maf, ldak for every SNP");
    ldak = t.ldak;
  }

  cvc::ArchitectureSpec arch;
  arch.h2_target = s.h2;
  arch.mode = s.mode == "misspec" ? cvc::ArchitectureMode::misspecified : cvc::ArchitectureMode::correct;
  arch.a = s.a;
  arch.b_coupling = s.b;
  arch.cvr = s.cvr;
  arch.causal_maf_low = s.maf_low;
  arch.causal_maf_high = s.maf_high;
  arch.error_law = s.errors == "gumbel" ? cvc::ErrorLaw::gumbel : cvc::ErrorLaw::normal;

  const Eigen::MatrixXd w = cvc::simulate_covariates(s.n, static_cast<std::size_t>(s.covariates), s.seed);
  const cvc::SimulatedPhenotype ph = cvc::simulate_phenotypes(src, w, arch, s.seed, geno.maf, ldak);
  const cvc::CensoredData cens = cvc::calibrate_censoring(ph.y, s.rate, std::sqrt(ph.sigma_e), s.seed);

  cvc::write_phenotypes(s.out + ".pheno.tsv", geno.subject_ids, cens.samples);
  cvc::write_covariates(s.out + ".covar.tsv", geno.subject_ids, w);
  std::vector<std::string> snp_ids;
  for (const auto& snp : src.snps()) snp_ids.push_back(snp.id);
  cvc::write_annotations(s.out + ".annot.tsv", snp_ids, geno.maf, ldak);

  nlohmann::ordered_json truth;
  truth["seed"] = s.seed;
  truth["n"] = s.n;
  truth["m"] = s.m;
  truth["k"] = s.k;
  truth["rho"] = s.rho;
  truth["mode"] = s.mode;
  truth["error_law"] = s.errors;
  truth["h2"] = ph.h2;
  std::vector<double> sigma_k(ph.sigma_k.data(), ph.sigma_k.data() + ph.sigma_k.size());
  truth["sigma2_k"] = sigma_k;
  truth["h2_k"] = [&] {
    std::vector<double> h(sigma_k.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = sigma_k[i] / (ph.sigma_g + ph.sigma_e);
    return h;
  }();
  truth["sigma2_g"] = ph.sigma_g;
  truth["sigma2_e"] = ph.sigma_e;
  truth["n_causal"] = ph.n_causal;
  truth["target_censoring_rate"] = s.rate;
  truth["realized_censoring_rate"] = cens.realized_rate;
  truth["mu_c"] = cens.spec.mu_c ? nlohmann::ordered_json(*cens.spec.mu_c) : nlohmann::ordered_json(nullptr);
  truth["sigma_c"] = cens.spec.sigma_c;
  cvc::write_text(s.out + ".truth.json", truth.dump(2) + "\n");
  log("wrote " + s.out + ".{bed,bim,fam,pheno.tsv,covar.tsv,annot.tsv,truth.json}");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Censored variance-component heritability estimation"};
  app.require_subcommand(1);
  Config cfg;
  SimConfig sim;

  auto* est = app.add_subcommand("estimate", "Total and partitioned heritability of a censored trait");
  add_input_options(est, cfg);
  add_fit_options(est, cfg);

  auto* lt = app.add_subcommand("estimate-lt", "Liability-threshold baseline on the censoring indicator");
  add_input_options(lt, cfg);
  add_fit_options(lt, cfg);

  auto* km = app.add_subcommand("km", "Kaplan-Meier estimate of the censoring distribution");
  km->add_option("--pheno", cfg.pheno, "Phenotype TSV (id, time, status)")->required();
  km->add_flag("--pre-logged", cfg.pre_logged, "Phenotype time is already on the log scale");
  km->add_option("--cap", cfg.cap, "Clamp for the censoring CDF (default 1 - 1/(2N))");
  km->add_option("-o,--out", cfg.out, "Output TSV (default stdout)");

  auto* check = app.add_subcommand("check", "Validate inputs and predict resource use");
  add_input_options(check, cfg);
  check->add_option("-B,--probes", cfg.probes, "Random probe vectors")->check(CLI::PositiveNumber);
  check->add_option("-J,--jackknife", cfg.jackknife, "Jackknife blocks")->check(CLI::PositiveNumber);
  check->add_option("--jackknife-mode", cfg.jackknife_mode, "within | global")
      ->check(CLI::IsMember({"within", "global"}));
  check->add_option("--memory-budget", cfg.memory_budget, "Bytes of working arrays kept in RAM");
  check->add_option("-o,--out", cfg.out, "Output JSON (default stdout)");

  auto* simc = app.add_subcommand("simulate", "Simulate genotypes and a censored trait");
  simc->add_option("--n", sim.n, "Subjects")->check(CLI::PositiveNumber);
  simc->add_option("--m", sim.m, "SNPs")->check(CLI::PositiveNumber);
  simc->add_option("-K,--partitions", sim.k, "Contiguous partitions")->check(CLI::PositiveNumber);
  simc->add_option("--covariates", sim.covariates, "Covariate columns besides the intercept")
      ->check(CLI::NonNegativeNumber);
  simc->add_option("--rho", sim.rho, "Adjacent-SNP latent correlation");
  simc->add_option("--h2", sim.h2, "Target heritability");
  simc->add_option("--rate", sim.rate, "Target censoring rate");
  simc->add_option("--mode", sim.mode, "correct | misspec")->check(CLI::IsMember({"correct", "misspec"}));
  simc->add_option("--a", sim.a, "MAF coupling exponent");
  simc->add_option("--b", sim.b, "LDAK coupling exponent");
  simc->add_option("--cvr", sim.cvr, "Causal variant rate");
  simc->add_option("--maf-low", sim.maf_low, "Lower MAF bound of causal SNPs");
  simc->add_option("--maf-high", sim.maf_high, "Upper MAF bound of causal SNPs");
  simc->add_option("--errors", sim.errors, "normal | gumbel")->check(CLI::IsMember({"normal", "gumbel"}));
  simc->add_option("--ldak", sim.ldak, "Annotation TSV (id, maf, ldak) supplying LDAK scores");
  simc->add_option("--seed", sim.seed, "Seed");
  simc->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);
  simc->add_option("-o,--out", sim.out, "Output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (est->parsed()) return run_estimate(cfg, false);
    if (lt->parsed()) return run_estimate(cfg, true);
    if (km->parsed()) return run_km(cfg);
    if (check->parsed()) return run_check(cfg);
    if (simc->parsed()) return run_simulate(sim);
  } catch (const cvc::Error& e) {
    log(std::string("error: ") + e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    log(std::string("error: ") + e.what());
    return static_cast<int>(cvc::ErrorKind::io);
  } catch (const std::bad_alloc&) {
    log("error: out of memory");
    return static_cast<int>(cvc::ErrorKind::numerical);
  }
  return 2;
}
