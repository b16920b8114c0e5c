#include "cvc/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cvc/error.hpp"

namespace cvc {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json to_array(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

int label_of(const std::vector<int>& labels, int k) {
  return labels.empty() ? k : labels[static_cast<std::size_t>(k)];
}

}  // namespace

std::string report_json(const FitResult& fit, const RunMetadata& meta,
                        const std::vector<int>& partition_labels,
                        const AlignmentSummary* alignment) {
  const HeritabilityReport& r = fit.report;
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["method"] = fit.method;
  j["scale"] = fit.method == "lt" ? "liability" : "log_time";

  ordered_json run;
  run["command"] = meta.command;
  run["seed"] = meta.seed;
  run["probes"] = meta.exact_trace ? 0 : meta.probes;
  run["exact_trace"] = meta.exact_trace;
  run["jackknife_blocks"] = meta.jackknife_blocks;
  run["jackknife_mode"] = meta.jackknife_mode;
  run["threads"] = meta.threads;
  run["strict_deterministic"] = meta.strict_deterministic;
  run["spilled_to_disk"] = fit.spilled;
  ordered_json inputs = ordered_json::object();
  for (const auto& [role, path] : meta.inputs) inputs[role] = path;
  run["inputs"] = inputs;
  j["run"] = run;

  ordered_json data;
  data["n_subjects"] = fit.n;
  data["n_snps"] = fit.m;
  data["n_partitions"] = fit.k;
  data["covariate_rank"] = fit.rank;
  data["censoring_rate"] = fit.censoring_rate;
  if (alignment) {
    data["phenotype_rows"] = alignment->phenotype_rows;
    data["covariate_rows"] = alignment->covariate_rows;
    data["genotype_subjects"] = alignment->genotype_subjects;
    data["subjects_dropped"] = alignment->subjects_dropped;
    data["snps_in_file"] = alignment->snps_in_file;
    data["snps_dropped"] = alignment->dropped_snps.size();
    data["partitions_requested"] = alignment->partitions_requested;
    data["empty_partitions"] = alignment->empty_partitions;
    data["warnings"] = alignment->warnings;
  }
  data["genotype_passes"] = fit.io.passes;
  j["data"] = data;

  ordered_json est;
  est["h2_total"] = r.h2_total;
  est["se_total"] = r.se_total;
  ordered_json parts = ordered_json::array();
  for (int k = 0; k < r.k(); ++k) {
    ordered_json p;
    p["partition"] = label_of(partition_labels, k);
    p["n_snps"] = fit.system.m_k.empty() ? 0 : fit.system.m_k[static_cast<std::size_t>(k)];
    p["h2"] = r.h2_partition(k);
    p["se"] = r.se_partition(k);
    p["sigma2"] = r.components.sigma_g(k);
    parts.push_back(p);
  }
  est["partitions"] = parts;
  est["sigma2_e"] = r.components.sigma_e;
  est["condition_number"] = r.condition_number;
  j["estimates"] = est;

  ordered_json jk = ordered_json::array();
  for (Eigen::Index row = 0; row < r.jackknife_estimates.rows(); ++row) {
    jk.push_back(to_array(r.jackknife_estimates.row(row).transpose()));
  }
  j["jackknife_h2"] = jk;

  ordered_json sys;
  ordered_json lhs = ordered_json::array();
  for (Eigen::Index row = 0; row < fit.system.full.lhs.rows(); ++row) {
    lhs.push_back(to_array(fit.system.full.lhs.row(row).transpose()));
  }
  sys["lhs"] = lhs;
  sys["rhs"] = to_array(fit.system.full.rhs);
  j["normal_equations"] = sys;

  return j.dump(2) + "\n";
}

std::string report_tsv(const FitResult& fit, const std::vector<int>& partition_labels) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "partition\th2\tse\n";
  const HeritabilityReport& r = fit.report;
  for (int k = 0; k < r.k(); ++k) {
    out << label_of(partition_labels, k) << '\t' << r.h2_partition(k) << '\t' << r.se_partition(k) << '\n';
  }
  out << "total\t" << r.h2_total << '\t' << r.se_total << '\n';
  return out.str();
}

std::string cdf_tsv(const CensoringCdf& cdf) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "time\tcdf\n";
  for (std::size_t k = 0; k < cdf.jump_times().size(); ++k) {
    out << cdf.jump_times()[k] << '\t' << cdf.cdf_values()[k] << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.close();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("error writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

}  // namespace cvc
