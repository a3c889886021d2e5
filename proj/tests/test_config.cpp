#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stagelens/config.hpp"
#include "stagelens/error.hpp"

using namespace stagelens;

TEST(Config, DefaultsAreValid) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.imbalance.balance_coefficient, 0.1);
  EXPECT_EQ(cfg.skew.size_ratio_threshold, 1.5);
  EXPECT_EQ(cfg.straggler.runtime_ratio_threshold, 1.5);
  EXPECT_EQ(cfg.placement.priority(Locality::Any), 2.0);
  EXPECT_EQ(cfg.placement.priority(Locality::ProcessLocal), 0.0);
}

TEST(Config, EveryKeyRoundTripsThroughEntries) {
  PipelineConfig cfg;
  cfg.set("representative", "median");
  cfg.set("dmin", "0.5");
  cfg.set("transform", "fft");
  cfg.set("priority.RACK_LOCAL", "1.5");
  PipelineConfig copy;
  for (const auto& [k, v] : cfg.entries()) copy.set(k, v);
  EXPECT_EQ(copy.entries(), cfg.entries());
  for (const auto& key : config_keys()) {
    bool listed = false;
    for (const auto& [k, v] : cfg.entries()) listed = listed || k == key;
    EXPECT_TRUE(listed) << key;
  }
}

TEST(Config, UnknownKeyAndBadValues) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.set("nope", "1"), ConfigError);
  EXPECT_THROW(cfg.set("bc", "abc"), ConfigError);
  EXPECT_THROW(cfg.set("transform", "wavelet"), ConfigError);
  EXPECT_THROW(cfg.set("priority.NOWHERE", "1"), ConfigError);
  EXPECT_THROW(cfg.set("homogeneous", "maybe"), ConfigError);
}

TEST(Config, RangeChecks) {
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{{"bc", "1.5"},
                                                                           {"bc", "0"},
                                                                           {"th_ub", "0"},
                                                                           {"th_size", "1"},
                                                                           {"th_simi", "1"},
                                                                           {"dmin", "-0.1"},
                                                                           {"ccrate", "0"},
                                                                           {"priority.ANY", "-1"}}) {
    PipelineConfig cfg;
    cfg.set(key, value);
    EXPECT_THROW(cfg.validate(), ConfigError) << key << "=" << value;
  }
}

TEST(Config, FileLinesAndErrors) {
  PipelineConfig cfg;
  std::istringstream ok("# published setting\n\nbc = 0.2\n  representative=median  \n");
  apply_config(cfg, ok, "site.conf");
  EXPECT_EQ(cfg.imbalance.balance_coefficient, 0.2);
  EXPECT_EQ(cfg.outlier.representative, metric::Representative::Median);

  std::istringstream bad("bc = 0.2\nth_d 1.5\n");
  try {
    apply_config(cfg, bad, "site.conf");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "site.conf");
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream unknown("\nzzz = 1\n");
  try {
    apply_config(cfg, unknown, "x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Config, FlagOverridesFileOverridesDefault) {
  PipelineConfig cfg;
  std::istringstream file("dmin = 0.5\nth_simi = 0.4\n");
  apply_config(cfg, file);
  cfg.set("dmin", "0.7");
  EXPECT_EQ(cfg.outlier.dmin, 0.7);
  EXPECT_EQ(cfg.similarity.threshold, 0.4);
  EXPECT_EQ(cfg.imbalance.balance_coefficient, 0.1);
}

TEST(Config, MissingFileIsAnError) {
  PipelineConfig cfg;
  EXPECT_THROW(apply_config_file(cfg, "/nonexistent/stagelens.conf"), Error);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.5), "1.5");
  EXPECT_EQ(format_number(2.0), "2");
  oracle::Gen g(71);
  for (int i = 0; i < 1000; ++i) {
    const double v = g.real(-1e6, 1e6) * std::pow(10.0, static_cast<double>(g.integer(-8, 8)));
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}
