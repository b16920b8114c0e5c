#include <cstdlib>
#include <fstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"

using namespace cvc::testing;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

CliRun run(const TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CVC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small simulated dataset shared by the estimate and check tests.
class CliData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cvc-cli");
    const CliRun r = run(*dir_, "simulate --n 600 --m 240 -K 2 --covariates 2 --h2 0.5 --rate 0.2 --seed 3 -o " +
                                 (dir_->path() / "sim").string());
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string inputs() {
    const std::string p = (dir_->path() / "sim").string();
    return "--bfile " + p + " --pheno " + p + ".pheno.tsv --covar " + p + ".covar.tsv";
  }
  static TempDir* dir_;
};

TempDir* CliData::dir_ = nullptr;

}  // namespace

TEST(Cli, ParseErrorIsInputError) {
  TempDir dir;
  EXPECT_EQ(run(dir, "").code, 2);
  EXPECT_EQ(run(dir, "estimate --bogus").code, 2);
}

TEST(Cli, KmThreeRowFixture) {
  TempDir dir;
  write_file(dir / "p.tsv", "id\ttime\tstatus\na\t1\t0\nb\t2\t1\nc\t3\t0\n");
  const CliRun r = run(dir, "km --pre-logged --cap 0.9 --pheno " + (dir / "p.tsv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "time\tcdf\n1\t0.33333333333333331\n3\t0.90000000000000002\n");
}

TEST(Cli, KmUncensoredPrintsNote) {
  TempDir dir;
  write_file(dir / "p.tsv", "id\ttime\tstatus\na\t1\t1\nb\t2\t1\n");
  const CliRun r = run(dir, "km --pheno " + (dir / "p.tsv").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "time\tcdf\n");
  EXPECT_NE(r.err.find("note"), std::string::npos);
}

TEST(Cli, KmMalformedStatus) {
  TempDir dir;
  write_file(dir / "p.tsv", "id\ttime\tstatus\na\t1\t1\nb\t2\t7\n");
  const CliRun r = run(dir, "km --pheno " + (dir / "p.tsv").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST_F(CliData, MissingPhenotypeIsIoError) {
  const std::string p = (dir_->path() / "sim").string();
  const fs::path out = dir_->path() / "nopheno";
  const CliRun r = run(*dir_, "estimate --bfile " + p + " --pheno " + p + ".absent.tsv -o " + out.string());
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(fs::exists(out.string() + ".json"));
  EXPECT_FALSE(fs::exists(out.string() + ".tsv"));
}

TEST_F(CliData, EmptyIntersectionIsInputError) {
  const fs::path pheno = dir_->path() / "strangers.tsv";
  write_file(pheno, "id\ttime\tstatus\nx1\t1\t1\nx2\t2\t0\n");
  const CliRun r = run(*dir_, "estimate --bfile " + (dir_->path() / "sim").string() + " --pheno " +
                               pheno.string() + " -o " + (dir_->path() / "empty").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty subject intersection"), std::string::npos);
}

TEST_F(CliData, EstimateWritesReports) {
  const fs::path out = dir_->path() / "est";
  const CliRun r = run(*dir_, "estimate " + inputs() + " -K 2 -J 10 --seed 4 -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out.string() + ".json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["method"], "cvc");
  EXPECT_EQ(j["run"]["probes"], 10);
  EXPECT_EQ(j["run"]["jackknife_blocks"], 10);
  EXPECT_EQ(j["estimates"]["partitions"].size(), 2u);
  EXPECT_EQ(j["jackknife_h2"].size(), 10u);
  const double h2 = j["estimates"]["h2_total"];
  const double sum = static_cast<double>(j["estimates"]["partitions"][0]["h2"]) +
                     static_cast<double>(j["estimates"]["partitions"][1]["h2"]);
  EXPECT_NEAR(h2, sum, 1e-12);
  const std::string tsv = slurp(out.string() + ".tsv");
  EXPECT_EQ(tsv.rfind("partition\th2\tse\n", 0), 0u);
  EXPECT_NE(tsv.find("\ntotal\t"), std::string::npos);
}

TEST_F(CliData, RepeatedRunsAreByteIdentical) {
  const fs::path a = dir_->path() / "rep_a", b = dir_->path() / "rep_b";
  ASSERT_EQ(run(*dir_, "estimate " + inputs() + " -K 2 -J 5 --threads 2 -o " + a.string()).code, 0);
  ASSERT_EQ(run(*dir_, "estimate " + inputs() + " -K 2 -J 5 --threads 2 -o " + b.string()).code, 0);
  EXPECT_EQ(slurp(a.string() + ".json"), slurp(b.string() + ".json"));
}

TEST_F(CliData, LiabilityBaseline) {
  const fs::path out = dir_->path() / "lt";
  const CliRun r = run(*dir_, "estimate-lt " + inputs() + " -J 5 -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out.string() + ".json"));
  EXPECT_EQ(j["method"], "lt");
}

TEST_F(CliData, CheckHealthy) {
  const CliRun r = run(*dir_, "check " + inputs() + " -K 2 -J 10");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_GT(static_cast<double>(j["predicted_peak_ram_bytes"]), 0.0);
}

TEST_F(CliData, CheckGridOccupancy) {
  const fs::path annot = dir_->path() / "common.tsv";
  std::string text = "id\tmaf\tldak\n";
  for (int j = 1; j <= 240; ++j) text += "snp" + std::to_string(j) + "\t0.2\t" + std::to_string(j) + "\n";
  write_file(annot, text);
  const CliRun r = run(*dir_, "check " + inputs() + " --annot " + annot.string() + " -J 5");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["status"], "warnings");
  EXPECT_EQ(j["empty_partitions"].size(), 20u);
  EXPECT_NE(r.out.find("20 of 24 partitions are empty"), std::string::npos);
}

TEST_F(CliData, CheckTooManyJackknifeBlocks) {
  const CliRun r = run(*dir_, "check " + inputs() + " -K 2 -J 200");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("jackknife blocks"), std::string::npos);
}
