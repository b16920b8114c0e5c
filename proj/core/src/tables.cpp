#include "cvc/tables.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cvc/error.hpp"

namespace cvc {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_no;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_tabs(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InputError(path.string() + " line " + std::to_string(no) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_no.push_back(no);
  }
  if (in.bad()) throw IoError("error reading " + path.string());
  if (t.header.empty()) throw InputError(path.string() + ": missing header row");
  return t;
}

std::size_t column(const Table& t, const std::string& name, const fs::path& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw InputError(path.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

bool has_column(const Table& t, const std::string& name) {
  return std::find(t.header.begin(), t.header.end(), name) != t.header.end();
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line,
                    const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw InputError(path.string() + " line " + std::to_string(line) + ": invalid " + what + " '" +
                     s + "'");
  }
  return v;
}

void check_unique(const std::vector<std::string>& ids, const fs::path& path) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw InputError(path.string() + ": duplicate id '" + id + "'");
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

PhenotypeTable read_phenotypes(const fs::path& path, bool pre_logged) {
  const Table t = read_table(path);
  const std::size_t ci = column(t, "id", path), ct = column(t, "time", path),
                    cs = column(t, "status", path);
  PhenotypeTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_no[r];
    const double time = parse_double(row[ct], path, line, "time");
    const std::string& st = row[cs];
    if (st != "0" && st != "1") {
      throw InputError(path.string() + " line " + std::to_string(line) + ": status must be 0 or 1, got '" +
                       st + "'");
    }
    double u = time;
    if (!pre_logged) {
      if (!(time > 0.0)) {
        throw InputError(path.string() + " line " + std::to_string(line) + ": time must be positive");
      }
      u = std::log(time);
    }
    out.ids.push_back(row[ci]);
    out.samples.push_back({u, st == "1"});
  }
  if (out.ids.empty()) throw InputError(path.string() + ": no phenotype rows");
  check_unique(out.ids, path);
  return out;
}

void write_phenotypes(const fs::path& path, std::span<const std::string> ids,
                      std::span<const CensoredSample> samples, bool pre_logged) {
  if (ids.size() != samples.size()) throw InputError("phenotype ids and samples differ in length");
  auto out = open_out(path);
  out << "id\ttime\tstatus\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t' << (pre_logged ? samples[i].u : std::exp(samples[i].u)) << '\t'
        << (samples[i].event ? 1 : 0) << '\n';
  }
  finish(out, path);
}

CovariateTable read_covariates(const fs::path& path) {
  const Table t = read_table(path);
  const std::size_t ci = column(t, "id", path);
  CovariateTable out;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == ci) continue;
    cols.push_back(c);
    out.names.push_back(t.header[c]);
  }
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.ids.push_back(t.rows[r][ci]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(t.rows[r][cols[c]], path, t.line_no[r], "covariate " + t.header[cols[c]]);
    }
  }
  check_unique(out.ids, path);
  return out;
}

void write_covariates(const fs::path& path, std::span<const std::string> ids,
                      const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(ids.size()) != values.rows()) {
    throw InputError("covariate ids and rows differ in length");
  }
  auto out = open_out(path);
  out << "id";
  for (Eigen::Index c = 0; c < values.cols(); ++c) out << "\tc" << (c + 1);
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << '\t' << values(static_cast<Eigen::Index>(i), c);
    out << '\n';
  }
  finish(out, path);
}

AnnotationTable read_annotations(const fs::path& path) {
  const Table t = read_table(path);
  const std::size_t ci = column(t, "id", path);
  AnnotationTable out;
  out.has_partition = has_column(t, "partition");
  out.has_grid = has_column(t, "maf") && has_column(t, "ldak");
  if (!out.has_partition && !out.has_grid) {
    throw InputError(path.string() + ": need a 'partition' column or 'maf' and 'ldak' columns");
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    out.ids.push_back(row[ci]);
    if (out.has_partition) {
      const double p = parse_double(row[column(t, "partition", path)], path, t.line_no[r], "partition");
      if (p < 0 || p != std::floor(p) || p > 1e6) {
        throw InputError(path.string() + " line " + std::to_string(t.line_no[r]) +
                         ": partition must be a non-negative integer");
      }
      out.partition.push_back(static_cast<int>(p));
    }
    if (out.has_grid) {
      out.maf.push_back(parse_double(row[column(t, "maf", path)], path, t.line_no[r], "maf"));
      out.ldak.push_back(parse_double(row[column(t, "ldak", path)], path, t.line_no[r], "ldak"));
    }
  }
  check_unique(out.ids, path);
  return out;
}

void write_annotations(const fs::path& path, std::span<const std::string> ids,
                       std::span<const double> maf, std::span<const double> ldak) {
  if (ids.size() != maf.size() || ids.size() != ldak.size()) {
    throw InputError("annotation columns differ in length");
  }
  auto out = open_out(path);
  out << "id\tmaf\tldak\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << '\t' << maf[i] << '\t' << ldak[i] << '\n';
  finish(out, path);
}

}  // namespace cvc
