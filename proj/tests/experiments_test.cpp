#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "thinshell/experiments.hpp"

using namespace thinshell;

namespace {

std::string golden(const std::string& name) {
  std::ifstream is(std::string(THINSHELL_GOLDEN_DIR) + "/" + name + ".header");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string first_line(const std::string& body) { return body.substr(0, body.find('\n') + 1); }

std::vector<std::string> lines(const std::string& body) {
  std::vector<std::string> out;
  std::istringstream is(body);
  std::string l;
  while (std::getline(is, l)) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string c;
  std::istringstream is(line);
  while (std::getline(is, c, ',')) out.push_back(c);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

ExperimentConfig small(const std::string& text) { return parse_config(text); }

}  // namespace

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::num(0.1), "0.10000000000000001");
  EXPECT_EQ(csv::num(1.0), "1");
  EXPECT_EQ(csv::num(std::optional<double>{}), "");
  EXPECT_EQ(csv::num(kInfinity), "inf");
  EXPECT_EQ(csv::flag(true), "true");
}

TEST(Golden, BoundsSchema) {
  const auto r = run("bounds", small("n_list=50\nk_list=1,3\nC=1\n"));
  EXPECT_EQ(first_line(r.body), golden("bounds"));
  const auto rows = lines(r.body);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto c = cells(rows[i]);
    ASSERT_EQ(c.size(), 13u) << rows[i];
    EXPECT_EQ(c[0], "50");
    EXPECT_EQ(c[10], "1");
    EXPECT_EQ(c[11], "true");
    EXPECT_EQ(c[12], "true");
  }
  EXPECT_TRUE(r.has_checks && r.all_pass);
}

TEST(Golden, BoundsEmptyDfCellForOtherFamilies) {
  const auto r = run("bounds", small("kind=power\np=3\nn_list=40\nk_list=2\nC=1\n"));
  const auto c = cells(lines(r.body)[1]);
  ASSERT_EQ(c.size(), 13u);
  EXPECT_EQ(c[9], "");
}

TEST(Golden, ConverseSchema) {
  const auto r = run("converse", small("n_list=20,40\neps_list=0.5,1\n"));
  EXPECT_EQ(first_line(r.body), golden("converse"));
  const auto rows = lines(r.body);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(cells(rows[1])[1], "10");
  EXPECT_EQ(cells(rows[3])[1], "20");
}

TEST(Golden, EnsemblesSchema) {
  const auto r = run("ensembles",
                     small("kind=linear_half\nn_list=10\nk_list=2\ncount=200\nseed=3\ntestfn=fsum,const\n"));
  EXPECT_EQ(first_line(r.body), golden("ensembles"));
  const auto rows = lines(r.body);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(cells(rows[2])[2], "const");
  EXPECT_EQ(cells(rows[2])[5], "0");
}

TEST(Golden, MixtureSchema) {
  const auto r = run("mixture", small("n_list=100\nk_list=2\n"));
  EXPECT_EQ(first_line(r.body), golden("mixture"));
  EXPECT_TRUE(r.all_pass);
}

TEST(Golden, CltScanSchema) {
  const auto r = run("clt-scan", small("kind=linear_half\nclt_n_list=64,128,256\n"));
  EXPECT_EQ(first_line(r.body), golden("clt-scan"));
  EXPECT_NE(r.body.find("# C_hat="), std::string::npos);
  EXPECT_NE(r.body.find("# stable_64_256=true"), std::string::npos);
  EXPECT_TRUE(r.all_pass);
}

TEST(Golden, SolveCSchema) {
  const auto r = run("solve-c", small("kind=linear_half\nt=1\n"));
  EXPECT_EQ(first_line(r.body), golden("solve-c"));
  const auto c = cells(lines(r.body)[1]);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_NEAR(std::stod(c[1]), 1.0, 1e-10);
}

TEST(Golden, WnSchema) {
  const auto r = run("wn", small("kind=linear_half\nn_list=4\nwn_stride=1024\n"));
  EXPECT_EQ(first_line(r.body), golden("wn"));
  for (const auto& row : lines(r.body)) {
    if (row == lines(r.body)[0]) continue;
    const auto c = cells(row);
    ASSERT_EQ(c.size(), 6u);
    EXPECT_EQ(c[0], "4");
  }
  const auto plain = run("wn", small("kind=power\np=3\nn_list=4\nwn_stride=1024\n"));
  EXPECT_EQ(first_line(plain.body), "n,s,w,log_w\n");
}

TEST(Report, AnalyzeFBlock) {
  const auto r = run("analyze-f", small("kind=power\np=2\nsupport=symmetric\n"));
  EXPECT_NE(r.body.find("[membership]\n"), std::string::npos);
  EXPECT_NE(r.body.find("overall=true\n"), std::string::npos);
  EXPECT_NE(r.body.find("[end]\n"), std::string::npos);
  EXPECT_TRUE(r.all_pass);
}

TEST(Report, SampleSummary) {
  const auto r = run("sample", small("n_list=3\ncount=2000\nseed=5\n"));
  EXPECT_NE(r.body.find("method=scaling\n"), std::string::npos);
  EXPECT_NE(r.body.find("ks_first_coordinate="), std::string::npos);
  const auto rj = run("sample", small("n_list=3\ncount=500\nseed=5\nmethod=rejection\ndelta=0.1\n"));
  EXPECT_NE(rj.body.find("acceptance_rate="), std::string::npos);
  EXPECT_NE(rj.body.find("predicted_acceptance="), std::string::npos);
}

TEST(Report, FailedCheckIsReported) {
  // A constant far below the scanned one makes sqrt(n)/C large, so a tiny
  // C only loosens nothing; an absurd C is a precondition error instead.
  EXPECT_THROW(run("bounds", small("n_list=50\nk_list=1\nC=100\n")), PreconditionError);
}

TEST(Determinism, ByteIdenticalOutput) {
  const auto cfg = small("n_list=50,100\nk_list=1,5\nalpha_list=0,0.2\nC=1\n");
  EXPECT_EQ(run("bounds", cfg).body, run("bounds", cfg).body);
  const auto ens = small("kind=linear_half\nn_list=20\nk_list=2\ncount=3000\nseed=8\n");
  EXPECT_EQ(run("ensembles", ens).body, run("ensembles", ens).body);
  const auto rej = small("kind=quartic_perturbed\neps=0.5\nn_list=6\ncount=300\nseed=8\n");
  EXPECT_EQ(run("sample", rej).body, run("sample", rej).body);
}

TEST(Determinism, ThreadCountDoesNotChangeOutput) {
  const auto cfg = small("kind=linear_half\nn_list=20,40\nk_list=2\ncount=2000\nseed=8\n");
  const auto many = run("ensembles", cfg).body;
  setenv("THINSHELL_THREADS", "1", 1);
  const auto one = run("ensembles", cfg).body;
  unsetenv("THINSHELL_THREADS");
  EXPECT_EQ(many, one);
}

TEST(Run, UnknownSubcommand) { EXPECT_THROW(run("plot", ExperimentConfig{}), PreconditionError); }
