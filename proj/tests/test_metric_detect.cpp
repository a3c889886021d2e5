#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stagelens/error.hpp"
#include "stagelens/metric_detect.hpp"

using namespace stagelens;
using namespace stagelens::metric;

namespace {

std::vector<std::size_t> as_sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double frobenius_reconstruction_error(const Matrix& x, PcaScaling scaling) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < x.front().size(); ++c) names.push_back("m" + std::to_string(c));
  OutlierConfig cfg;
  cfg.pca_scaling = scaling;
  auto sel = pca_select_metrics(x, names, cfg);
  const auto cm = covariance_matrix(x, scaling);
  const std::size_t n = cm.size();
  double err = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double r = 0;
      for (std::size_t w = 0; w < sel.eigenvalues.size(); ++w)
        r += sel.eigenvalues[w] * sel.components[w][i] * sel.components[w][j];
      err += (r - cm[i][j]) * (r - cm[i][j]);
    }
  }
  return std::sqrt(err);
}

correlate::FeatureDatasets dataset(const std::map<std::string, std::vector<std::vector<double>>>& per_node,
                                   const std::vector<std::string>& names) {
  correlate::FeatureDatasets ds;
  ds.metric_names = names;
  for (const auto& [node, rows] : per_node) {
    auto& m = ds.matrices[node];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      m.timestamps.push_back(static_cast<TimestampMs>(r) * 1000);
      m.rows.emplace_back(rows[r].begin(), rows[r].end());
    }
  }
  return ds;
}

}  // namespace

TEST(Pca, SingleVaryingColumn) {
  Matrix x;
  for (int r = 0; r < 10; ++r) x.push_back({1.0, static_cast<double>(r * r), 7.0});
  auto sel = pca_select_metrics(x, {"a", "b", "c"}, {});
  EXPECT_EQ(sel.d, 1u);
  EXPECT_EQ(sel.selected, (std::vector<std::string>{"b"}));
}

TEST(Pca, CollinearPairNeedsOneComponent) {
  oracle::Gen g(21);
  Matrix x;
  for (int r = 0; r < 50; ++r) {
    const double a = g.real(0, 10);
    x.push_back({a, 3 * a + g.real(-1e-3, 1e-3)});
  }
  for (auto scaling : {PcaScaling::Standardize, PcaScaling::Center}) {
    OutlierConfig cfg;
    cfg.pca_scaling = scaling;
    auto sel = pca_select_metrics(x, {"a", "b"}, cfg);
    EXPECT_EQ(sel.d, 1u);
    EXPECT_GE(sel.cumulative_rate(1), 0.95);
  }
}

TEST(Pca, EigenvaluesDescendingAndReconstruct) {
  oracle::Gen g(22);
  for (int t = 0; t < 100; ++t) {
    Matrix x(10);
    for (auto& row : x) row = g.reals(8, -3, 3);
    EXPECT_LT(frobenius_reconstruction_error(x, PcaScaling::Standardize), 1e-9);
    EXPECT_LT(frobenius_reconstruction_error(x, PcaScaling::Center), 1e-9);
    auto sel = pca_select_metrics(x, {"a", "b", "c", "d", "e", "f", "g", "h"}, {});
    EXPECT_TRUE(std::is_sorted(sel.eigenvalues.rbegin(), sel.eigenvalues.rend()));
    EXPECT_NEAR(sel.cumulative_rate(8), 1.0, 1e-12);
  }
}

TEST(Pca, ConstantMatrixFallsBack) {
  Matrix x(5, std::vector<double>{1, 2});
  auto sel = pca_select_metrics(x, {"a", "b"}, {});
  EXPECT_TRUE(sel.fallback);
  EXPECT_EQ(sel.selected.size(), 2u);
  EXPECT_THROW(pca_select_metrics(Matrix{{1, 2}}, {"a", "b"}, {}), PreconditionError);
}

TEST(Pca, StandardizingMakesUnitsIrrelevant) {
  oracle::Gen g(23);
  Matrix x, y;
  for (int r = 0; r < 30; ++r) {
    auto row = g.reals(3, 0, 1);
    x.push_back(row);
    y.push_back({row[0] * 1e7, row[1], row[2] * 1e-3});
  }
  auto a = pca_select_metrics(x, {"a", "b", "c"}, {});
  auto b = pca_select_metrics(y, {"a", "b", "c"}, {});
  ASSERT_EQ(a.eigenvalues.size(), b.eigenvalues.size());
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i) EXPECT_NEAR(a.eigenvalues[i], b.eigenvalues[i], 1e-9);
  EXPECT_EQ(a.selected, b.selected);
}

TEST(PcaInput, DropsConstantAndIncompleteData) {
  auto ds = dataset({{"a", {{1, 5, 0}, {2, 5, 1}}}, {"b", {{3, 5, 2}}}}, {"x", "y", "z"});
  ds.matrices["b"].rows[0][2] = std::nullopt;
  auto in = prepare_pca_input(ds);
  EXPECT_EQ(in.names, (std::vector<std::string>{"x", "z"}));
  EXPECT_EQ(in.dropped, (std::vector<std::string>{"y"}));
  EXPECT_EQ(in.x.size(), 2u);
}

TEST(Reduce, Mean) {
  const std::vector<double> c(7, 4.25);
  EXPECT_EQ(*reduce_mean(c), 4.25);
  EXPECT_EQ(*reduce_mean(std::vector<double>{0, 1}), 0.5);
  EXPECT_FALSE(reduce_mean({}));
  oracle::Gen g(31);
  auto s = g.reals(60, -10, 10);
  double sum = 0;
  for (double v : s) sum += v;
  EXPECT_NEAR(*reduce_mean(s), sum / 60.0, 1e-12);
}

TEST(Fft, MatchesNaiveDft) {
  oracle::Gen g(32);
  for (std::size_t n : {1u, 2u, 8u, 64u}) {
    auto x = g.reals(n, -1, 1);
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft(a);
    auto ref = oracle::dft(x);
    for (std::size_t r = 0; r < n; ++r) EXPECT_LT(std::abs(a[r] - ref[r]), 1e-9);
  }
  std::vector<std::complex<double>> bad(6);
  EXPECT_THROW(fft(bad), PreconditionError);
}

TEST(Fft, ConstantSeriesHasNoEnergy) {
  EXPECT_NEAR(*reduce_fft(std::vector<double>(32, 3.5)), 0.0, 1e-12);
  EXPECT_FALSE(reduce_fft(std::vector<double>{1.0}));
}

TEST(Fft, SinusoidEnergySitsInTwoBins) {
  const std::size_t n = 64, k = 5;
  const double amp = 2.5;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = 1.0 + amp * std::sin(2 * std::numbers::pi * k * t / n);
  auto spec = centered_spectrum(x);
  for (std::size_t r = 0; r < n; ++r) {
    const double mag = std::abs(spec[r]);
    if (r == k || r == n - k) {
      EXPECT_NEAR(mag, amp * n / 2.0, 1e-9);
    } else {
      EXPECT_NEAR(mag, 0.0, 1e-9);
    }
  }
  EXPECT_NEAR(*reduce_fft(x), amp * n / std::numbers::sqrt2, 1e-9);
}

TEST(Fft, Parseval) {
  oracle::Gen g(33);
  for (int t = 0; t < 100; ++t) {
    const auto n = static_cast<std::size_t>(1) << g.integer(1, 8);
    auto x = g.reals(n, -100, 100);
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double lhs = 0;
    for (double v : x) lhs += (v - mean) * (v - mean);
    const double f = *reduce_fft(x);
    EXPECT_LT(std::abs(lhs - f * f / static_cast<double>(n)), 1e-9 * std::max(1.0, lhs));
  }
}

TEST(Fft, ShiftInvariantAndLinear) {
  oracle::Gen g(34);
  auto x = g.reals(40, -1, 1);
  auto shifted = x;
  for (auto& v : shifted) v += 17.0;
  auto scaled = x;
  for (auto& v : scaled) v *= 3.0;
  EXPECT_NEAR(*reduce_fft(x), *reduce_fft(shifted), 1e-9);
  EXPECT_NEAR(3.0 * *reduce_fft(x), *reduce_fft(scaled), 1e-9);
}

TEST(MinMax, Examples) {
  auto n = minmax_normalize(std::vector<double>{2, 4, 6});
  EXPECT_EQ(n.values, (std::vector<double>{0, 0.5, 1}));
  EXPECT_FALSE(n.degenerate);
  auto c = minmax_normalize(std::vector<double>{3, 3, 3});
  EXPECT_EQ(c.values, (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_TRUE(c.degenerate);
}

TEST(MinMax, RangeAndOrder) {
  oracle::Gen g(35);
  for (int t = 0; t < 1000; ++t) {
    auto v = g.reals(static_cast<std::size_t>(g.integer(2, 20)), -1e6, 1e6);
    auto n = minmax_normalize(v).values;
    EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
    EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[i] < v[j]) {
          EXPECT_LE(n[i], n[j]);
        }
      }
    }
  }
}

TEST(Outliers, MagnitudeExample) {
  std::map<std::string, double> raw{{"hw073", 0.006838}, {"hw106", 0.15604399}, {"hw114", 0.17810599}};
  OutlierConfig cfg;
  cfg.pct = 1.0;
  cfg.dmin = 0.5;
  std::vector<double> v{0.006838, 0.15604399, 0.17810599};
  // Every raw distance is below dmin, so the distance definition alone finds nothing.
  EXPECT_TRUE(db_outlier_oracle(v, 1.0, 0.5).empty());
  EXPECT_TRUE(magnitude_test(v, 2.0));
  EXPECT_EQ(magnitude_branch(v), (std::vector<std::size_t>{0}));
  auto r = detect_metric_outliers(raw, cfg);
  EXPECT_EQ(r.branch, Branch::Magnitude);
  EXPECT_EQ(r.outliers, (std::vector<std::string>{"hw073"}));
}

TEST(Outliers, EqualValuesGiveNothing) {
  auto r = detect_metric_outliers({{"a", 2.0}, {"b", 2.0}, {"c", 2.0}, {"d", 2.0}}, {});
  EXPECT_TRUE(r.evaluable);
  EXPECT_TRUE(r.outliers.empty());
}

TEST(Outliers, NarrowSpreadIsFlat) {
  auto r = detect_metric_outliers({{"a", 100.0}, {"b", 101.0}, {"c", 99.0}, {"d", 110.0}}, {});
  EXPECT_EQ(r.branch, Branch::None);
  EXPECT_TRUE(r.outliers.empty());
}

TEST(Outliers, FewerThanThreeNodes) {
  EXPECT_FALSE(detect_metric_outliers({{"a", 1.0}, {"b", 9.0}}, {}).evaluable);
}

TEST(Outliers, NonpositiveValuesSkipMagnitudeBranch) {
  auto r = detect_metric_outliers({{"a", -1.0}, {"b", 0.001}, {"c", 0.0012}, {"d", 150.0}}, {});
  EXPECT_EQ(r.branch, Branch::Distance);
  EXPECT_FALSE(r.notes.empty());
}

TEST(Outliers, OneHighNodeUnderBothRepresentatives) {
  std::map<std::string, double> v{{"a", 1.0}, {"b", 1.1}, {"c", 0.95}, {"d", 1.05}, {"e", 4.0}};
  for (auto rep : {Representative::MaxMin, Representative::Median}) {
    OutlierConfig cfg;
    cfg.representative = rep;
    cfg.dmin = rep == Representative::MaxMin ? 0.6 : 0.5;
    EXPECT_EQ(detect_metric_outliers(v, cfg).outliers, (std::vector<std::string>{"e"}));
  }
}

TEST(Outliers, DistanceBranchMatchesDbOnGapSeparatedSets) {
  oracle::Gen g(41);
  for (int t = 0; t < 500; ++t) {
    auto inst = oracle::gap_instance(g);
    const double n = static_cast<double>(inst.raw.size());
    const double pct = (n - static_cast<double>(inst.minority)) / (n - 1.0);
    auto norm = minmax_normalize(inst.raw).values;
    for (auto rep : {Representative::MaxMin, Representative::Median}) {
      OutlierConfig cfg;
      cfg.representative = rep;
      cfg.dmin = inst.dmin;
      const auto got = distance_branch(norm, cfg);
      EXPECT_EQ(got, as_sorted(oracle::db_outliers(norm, pct, inst.dmin)));
      EXPECT_EQ(got.size(), inst.minority);
    }
  }
}

TEST(Outliers, SingletonMinorityMatchesDbWithPctOne) {
  oracle::Gen g(42);
  int seen = 0;
  while (seen < 100) {
    auto inst = oracle::gap_instance(g);
    if (inst.minority != 1) continue;
    ++seen;
    auto norm = minmax_normalize(inst.raw).values;
    OutlierConfig cfg;
    cfg.dmin = inst.dmin;
    EXPECT_EQ(distance_branch(norm, cfg), oracle::db_outliers(norm, 1.0, inst.dmin));
  }
}

TEST(Outliers, TightPairsDivergeFromLiteralDbDefinition) {
  // Two tight pairs at opposite ends. The class rule flags the candidate pair;
  // DB with pct=1 flags nothing because each point has a neighbour within dmin.
  std::vector<double> v{0.0, 0.05, 0.95, 1.0};
  OutlierConfig cfg;
  cfg.representative = Representative::Median;
  cfg.dmin = 0.5;
  EXPECT_EQ(distance_branch(v, cfg), (std::vector<std::size_t>{2, 3}));
  EXPECT_TRUE(db_outlier_oracle(v, 1.0, 0.5).empty());
  EXPECT_TRUE(oracle::db_outliers(v, 1.0, 0.5).empty());
  // With pct = 2/3 both readings agree that every point is far from the other pair.
  EXPECT_EQ(db_outlier_oracle(v, 2.0 / 3.0, 0.5).size(), 4u);
}

TEST(DbOracle, DefinitionExamples) {
  EXPECT_EQ(db_outlier_oracle(std::vector<double>{0, 1}, 1.0, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(db_outlier_oracle(std::vector<double>{0, 0.1, 0.2}, 1.0, 0.5).empty());
}

TEST(DbOracle, AgreesWithIndependentImplementation) {
  oracle::Gen g(43);
  for (int t = 0; t < 300; ++t) {
    auto v = g.reals(10, 0, 1);
    const double pct = g.real(0.1, 1.0);
    const double dmin = g.real(0.05, 0.8);
    EXPECT_EQ(db_outlier_oracle(v, pct, dmin), oracle::db_outliers(v, pct, dmin));
  }
}

TEST(Diagnosis, ElevatedMetricOnOneNode) {
  oracle::Gen g(51);
  std::map<std::string, std::vector<std::vector<double>>> rows;
  for (auto node : {"a", "b", "c", "d", "e"}) {
    const double io = std::string(node) == "c" ? 0.3 : 0.02;
    for (int t = 0; t < 30; ++t) rows[node].push_back({0.5 * g.real(0.9, 1.1), io * g.real(0.9, 1.1), g.real(0.9, 1.1)});
  }
  auto ds = dataset(rows, {"cpu_usage", "ioWaitRatio", "IPC"});
  auto r = diagnose_outlier_metrics(ds, {});
  ASSERT_TRUE(r.evaluable);
  ASSERT_EQ(r.node_metrics.size(), 1u);
  EXPECT_EQ(r.node_metrics.at("c"), (std::vector<std::string>{"ioWaitRatio"}));
}

TEST(Diagnosis, HealthyNodesGiveNothing) {
  oracle::Gen g(52);
  std::map<std::string, std::vector<std::vector<double>>> rows;
  for (auto node : {"a", "b", "c", "d", "e", "f"}) {
    for (int t = 0; t < 60; ++t) rows[node].push_back({0.5 * g.real(0.9, 1.1), 0.02 * g.real(0.9, 1.1), g.real(0.9, 1.1)});
  }
  for (auto transform : {Transform::Mean, Transform::Fft}) {
    OutlierConfig cfg;
    cfg.transform = transform;
    EXPECT_TRUE(diagnose_outlier_metrics(dataset(rows, {"cpu_usage", "ioWaitRatio", "IPC"}), cfg).node_metrics.empty());
  }
}

TEST(Diagnosis, NeedsThreeNodes) {
  auto ds = dataset({{"a", {{1.0}, {2.0}}}, {"b", {{1.0}, {3.0}}}}, {"IPC"});
  EXPECT_FALSE(diagnose_outlier_metrics(ds, {}).evaluable);
}

TEST(Config, ParsersAndDefaults) {
  OutlierConfig cfg;
  EXPECT_EQ(cfg.representative, Representative::MaxMin);
  EXPECT_EQ(cfg.dmin, 0.6);
  EXPECT_EQ(cfg.ccrate, 0.95);
  EXPECT_EQ(parse_transform("fft"), Transform::Fft);
  EXPECT_EQ(parse_representative("median"), Representative::Median);
  EXPECT_EQ(parse_pca_scaling("center"), PcaScaling::Center);
  EXPECT_FALSE(parse_transform("wavelet"));
  cfg.ccrate = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
