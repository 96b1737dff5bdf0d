#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "thinshell/config.hpp"

using namespace thinshell;

namespace {

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PreconditionError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, FullFile) {
  const auto cfg = parse_config(R"(
# sweep for the exponential family
kind = linear_half
t = 2.5
n_list = [50, 100, 200]
k_list = 1 3 5
alpha_list = -0.2, 0, 0.2
C = 0.75
grid_size = 32768
source = fft
seed = 17   # reproducible
count = 500
testfn = fsum, const
)");
  EXPECT_EQ(cfg.kind, "linear_half");
  EXPECT_EQ(cfg.t, 2.5);
  EXPECT_EQ(cfg.n_list, (std::vector<int>{50, 100, 200}));
  EXPECT_EQ(cfg.k_list, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(cfg.alpha_list, (std::vector<double>{-0.2, 0.0, 0.2}));
  ASSERT_TRUE(cfg.C_override.has_value());
  EXPECT_EQ(*cfg.C_override, 0.75);
  EXPECT_EQ(cfg.grid.min_points, 32768u);
  EXPECT_EQ(cfg.source, DensitySource::fft);
  EXPECT_EQ(*cfg.seed, 17u);
  EXPECT_EQ(cfg.count, 500u);
  EXPECT_EQ(cfg.testfn, (std::vector<std::string>{"fsum", "const"}));
  EXPECT_EQ(cfg.spec().kind(), HamiltonianKind::linear_half);
}

TEST(ParseConfig, Defaults) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.kind, "quadratic");
  EXPECT_EQ(cfg.n_list, (std::vector<int>{50, 100, 200}));
  EXPECT_EQ(cfg.k_list, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(cfg.clt_n_list, (std::vector<int>{8, 16, 32, 64, 128, 256}));
  EXPECT_FALSE(cfg.C_override.has_value());
  EXPECT_FALSE(cfg.seed.has_value());
}

TEST(ParseConfig, ErrorsCarryLineAndField) {
  const auto msg = error_of([] { parse_config("kind=quadratic\n\nn_list=50,abc\n"); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("field 'n_list'"), std::string::npos) << msg;
  EXPECT_NE(error_of([] { parse_config("t=1\nbogus=2\n"); }).find("unknown key 'bogus'"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_config("just words\n"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("grid_size=1000\n"); }).find("power of two"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_config("t=-1\n"); }).find("positive"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("n_list=[1,2\n"); }).find("unterminated"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("method=gibbs\n"); }).find("unknown method"),
            std::string::npos);
}

TEST(Overrides, ReplaceFileValues) {
  auto cfg = parse_config("n_list=50\nC=2\n");
  apply_override(cfg, "n_list=10,20");
  apply_override(cfg, "C=auto");
  apply_override(cfg, "delta = 0.01");
  EXPECT_EQ(cfg.n_list, (std::vector<int>{10, 20}));
  EXPECT_FALSE(cfg.C_override.has_value());
  EXPECT_EQ(*cfg.delta, 0.01);
  const auto msg = error_of([&] { apply_override(cfg, "count=-3"); });
  EXPECT_NE(msg.find("override, field 'count'"), std::string::npos) << msg;
  EXPECT_NE(error_of([&] { apply_override(cfg, "count"); }).find("expected key=value"),
            std::string::npos);
}

TEST(Validate, PairsNeedKBelowN) {
  ExperimentConfig cfg;
  cfg.n_list = {10, 4};
  cfg.k_list = {1, 4};
  const auto msg = error_of([&] { validate(cfg, "bounds"); });
  EXPECT_NE(msg.find("k = 4 is not below n = 4"), std::string::npos) << msg;
  EXPECT_NO_THROW(validate(cfg, "clt-scan"));
}

TEST(Validate, SamplersNeedSeed) {
  ExperimentConfig cfg;
  EXPECT_NE(error_of([&] { validate(cfg, "sample"); }).find("seed"), std::string::npos);
  EXPECT_NE(error_of([&] { validate(cfg, "ensembles"); }).find("seed"), std::string::npos);
  cfg.seed = 1;
  EXPECT_NO_THROW(validate(cfg, "sample"));
}

TEST(Validate, MixtureListsMustAlign) {
  ExperimentConfig cfg;
  cfg.mix_t = {0.5, 1.0, 2.0};
  EXPECT_NE(error_of([&] { validate(cfg, "mixture"); }).find("mix_t"), std::string::npos);
}

TEST(Validate, UnknownKind) {
  ExperimentConfig cfg;
  cfg.kind = "sextic";
  EXPECT_NE(error_of([&] { validate(cfg, "solve-c"); }).find("field 'kind'"), std::string::npos);
}

TEST(Validate, PowerNeedsPAtLeastOne) {
  auto cfg = parse_config("kind=power\np=0.5\n");
  EXPECT_THROW(validate(cfg, "solve-c"), PreconditionError);
}
