#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stagelens/error.hpp"
#include "stagelens/node_detect.hpp"

using namespace stagelens;
using namespace stagelens::node;
using correlate::MetricVector;

namespace {

MetricVector vec(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Cosine, IdentityAndOrthogonality) {
  EXPECT_NEAR(cosine_similarity(vec({3, 1, 4}), vec({3, 1, 4})), 1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(vec({1, 0}), vec({0, 1})), 0.0);
}

TEST(Cosine, MatchesDotProductOracle) {
  const double c = cosine_similarity(vec({1, 2, 3}), vec({2, 4, 6.1}));
  EXPECT_NEAR(c, oracle::cosine({1, 2, 3}, {2, 4, 6.1}), 1e-15);
  EXPECT_NEAR(c, 28.3 / std::sqrt(14.0 * 57.21), 1e-15);
}

TEST(Cosine, SymmetricOnRandomVectors) {
  oracle::Gen g(8);
  for (int i = 0; i < 200; ++i) {
    auto a = g.reals(12, -5, 5);
    auto b = g.reals(12, -5, 5);
    EXPECT_EQ(cosine_similarity(vec(a), vec(b)), cosine_similarity(vec(b), vec(a)));
    EXPECT_NEAR(cosine_similarity(vec(a), vec(b)), oracle::cosine(a, b), 1e-12);
  }
}

TEST(Cosine, MissingDimensionsAreDroppedPairwise) {
  MetricVector a{1.0, std::nullopt, 2.0};
  MetricVector b{2.0, 7.0, 4.0};
  EXPECT_NEAR(cosine_similarity(a, b), 1.0, 1e-15);
  MetricVector none{std::nullopt, 1.0, std::nullopt};
  MetricVector other{1.0, std::nullopt, 1.0};
  EXPECT_THROW(cosine_similarity(none, other), PreconditionError);
  EXPECT_THROW(cosine_similarity(vec({0, 0}), vec({1, 1})), PreconditionError);
}

TEST(AbnormalNode, OneDivergentNodeOfSix) {
  std::map<std::string, MetricVector> v;
  oracle::Gen g(2);
  for (auto n : {"hw062", "hw073", "hw089", "hw103", "hw106"}) {
    v[n] = vec({10 * g.real(0.9, 1.1), 5 * g.real(0.9, 1.1), 1 * g.real(0.9, 1.1), 0.1});
  }
  v["hw114"] = vec({0.5, 0.2, 12, 0.1});
  auto r = detect_abnormal_nodes(v, {});
  ASSERT_TRUE(r.evaluable);
  ASSERT_EQ(r.nodes.size(), 6u);
  for (const auto& n : r.nodes) EXPECT_EQ(n.abnormal, n.node == "hw114") << n.node << " " << n.average;
}

TEST(AbnormalNode, IdenticalVectorsAreNeverAbnormal) {
  std::map<std::string, MetricVector> v;
  for (auto n : {"a", "b", "c", "d"}) v[n] = vec({1, 2, 3});
  for (const auto& n : detect_abnormal_nodes(v, {}).nodes) {
    EXPECT_NEAR(n.average, 1.0, 1e-15);
    EXPECT_FALSE(n.abnormal);
  }
}

TEST(AbnormalNode, AveragesMatchPairwiseOracle) {
  oracle::Gen g(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> raw{g.reals(6, 0, 3), g.reals(6, 0, 3), g.reals(6, 0, 3)};
    std::map<std::string, MetricVector> v{{"a", vec(raw[0])}, {"b", vec(raw[1])}, {"c", vec(raw[2])}};
    auto r = detect_abnormal_nodes(v, {});
    ASSERT_EQ(r.nodes.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        if (j != i) sum += oracle::cosine(raw[i], raw[j]);
      }
      EXPECT_NEAR(r.nodes[i].average, sum / 2.0, 1e-12);
    }
  }
}

TEST(AbnormalNode, ZeroVectorsAreSkipped) {
  std::map<std::string, MetricVector> v{{"a", vec({1, 1})}, {"b", vec({1, 2})}, {"z", vec({0, 0})}};
  auto r = detect_abnormal_nodes(v, {});
  EXPECT_EQ(r.skipped, (std::vector<std::string>{"z"}));
  EXPECT_EQ(r.nodes.size(), 2u);
  std::map<std::string, MetricVector> one{{"a", vec({1, 1})}};
  EXPECT_FALSE(detect_abnormal_nodes(one, {}).evaluable);
}

TEST(AbnormalNode, HeterogeneousClusterCarriesCaveat) {
  std::map<std::string, MetricVector> v{{"a", vec({1, 1})}, {"b", vec({1, 2})}};
  SimilarityConfig cfg;
  cfg.homogeneous = false;
  EXPECT_FALSE(detect_abnormal_nodes(v, cfg).notes.empty());
  EXPECT_TRUE(detect_abnormal_nodes(v, {}).notes.empty());
}

TEST(AbnormalNode, ThresholdRange) {
  SimilarityConfig cfg;
  EXPECT_EQ(cfg.threshold, 0.5);
  cfg.threshold = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
