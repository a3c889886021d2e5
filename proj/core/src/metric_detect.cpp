#include "stagelens/metric_detect.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stagelens/error.hpp"
#include "stagelens/ingest.hpp"
#include "stagelens/stats.hpp"

namespace stagelens::metric {

std::string_view to_string(Transform t) noexcept { return t == Transform::Fft ? "fft" : "mean"; }

std::string_view to_string(Representative r) noexcept {
  return r == Representative::Median ? "median" : "max_min";
}

std::string_view to_string(PcaScaling s) noexcept {
  return s == PcaScaling::Center ? "center" : "standardize";
}

std::string_view to_string(Branch b) noexcept {
  switch (b) {
    case Branch::None: return "none";
    case Branch::Distance: return "distance";
    case Branch::Magnitude: return "magnitude";
  }
  return "none";
}

std::optional<Transform> parse_transform(std::string_view text) noexcept {
  if (text == "mean") return Transform::Mean;
  if (text == "fft") return Transform::Fft;
  return std::nullopt;
}

std::optional<Representative> parse_representative(std::string_view text) noexcept {
  if (text == "median") return Representative::Median;
  if (text == "max_min") return Representative::MaxMin;
  return std::nullopt;
}

std::optional<PcaScaling> parse_pca_scaling(std::string_view text) noexcept {
  if (text == "standardize") return PcaScaling::Standardize;
  if (text == "center") return PcaScaling::Center;
  return std::nullopt;
}

void OutlierConfig::validate() const {
  if (!(dmin > 0.0 && dmin < 1.0)) throw ConfigError("dmin must lie in (0,1)");
  if (!(pct > 0.0 && pct <= 1.0)) throw ConfigError("pct must lie in (0,1]");
  if (!(ccrate > 0.0 && ccrate <= 1.0)) throw ConfigError("ccrate must lie in (0,1]");
  if (!(magnitude_gap > 0.0) || !std::isfinite(magnitude_gap)) throw ConfigError("magnitude_gap must be positive");
  if (!(min_relative_spread >= 0.0) || !std::isfinite(min_relative_spread))
    throw ConfigError("min_relative_spread must be >= 0");
  if (!(loading_ratio > 0.0 && loading_ratio <= 1.0)) throw ConfigError("loading_ratio must lie in (0,1]");
}

// ---------------------------------------------------------------- PCA

namespace {

bool is_constant(const std::vector<double>& col) {
  if (col.empty()) return true;
  auto [lo, hi] = std::minmax_element(col.begin(), col.end());
  return *hi - *lo <= 1e-12 * std::max({std::abs(*hi), std::abs(*lo), 1.0});
}

}  // namespace

Matrix covariance_matrix(const Matrix& x, PcaScaling scaling) {
  if (x.empty()) return {};
  const std::size_t m = x.size();
  const std::size_t n = x.front().size();
  Matrix z = x;
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += x[r][c];
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      z[r][c] = x[r][c] - mean;
      ss += z[r][c] * z[r][c];
    }
    const double sd = std::sqrt(ss / static_cast<double>(m));
    if (scaling == PcaScaling::Standardize && sd > 0.0) {
      for (std::size_t r = 0; r < m; ++r) z[r][c] /= sd;
    }
  }
  Matrix cm(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += z[r][i] * z[r][j];
      cm[i][j] = cm[j][i] = s / static_cast<double>(m);
    }
  }
  return cm;
}

double PcaSelection::cumulative_rate(std::size_t k) const {
  double total = 0.0, head = 0.0;
  for (std::size_t w = 0; w < eigenvalues.size(); ++w) {
    const double l = std::max(eigenvalues[w], 0.0);
    total += l;
    if (w < k) head += l;
  }
  return total > 0.0 ? head / total : 0.0;
}

PcaSelection pca_select_metrics(const Matrix& x, const std::vector<std::string>& names, const OutlierConfig& cfg) {
  if (x.size() < 2) throw PreconditionError("PCA needs at least two samples");
  for (const auto& row : x) {
    if (row.size() != names.size()) throw PreconditionError("PCA matrix width does not match metric names");
  }

  PcaSelection out;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<double> col;
    col.reserve(x.size());
    for (const auto& row : x) col.push_back(row[c]);
    if (is_constant(col)) {
      out.notes.push_back("constant column " + names[c] + " excluded from PCA");
    } else {
      keep.push_back(c);
    }
  }
  if (keep.empty()) {
    out.fallback = true;
    out.selected = names;
    out.notes.push_back("no metric varies in this stage; all metrics selected");
    return out;
  }

  Matrix sub(x.size(), std::vector<double>(keep.size()));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < keep.size(); ++c) sub[r][c] = x[r][keep[c]];
  }
  for (auto c : keep) out.metrics.push_back(names[c]);

  const Matrix cm = covariance_matrix(sub, cfg.pca_scaling);
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = cm[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw Error("PCA eigen-decomposition failed");

  // Eigen returns ascending eigenvalues.
  for (Eigen::Index w = n - 1; w >= 0; --w) {
    out.eigenvalues.push_back(solver.eigenvalues()(w));
    std::vector<double> comp(keep.size());
    for (Eigen::Index c = 0; c < n; ++c) comp[c] = solver.eigenvectors()(c, w);
    out.components.push_back(std::move(comp));
  }

  out.d = out.eigenvalues.size();
  for (std::size_t k = 1; k <= out.eigenvalues.size(); ++k) {
    if (out.cumulative_rate(k) >= cfg.ccrate - 1e-12) {
      out.d = k;
      break;
    }
  }

  std::vector<bool> chosen(keep.size(), false);
  for (std::size_t w = 0; w < out.d; ++w) {
    const auto& comp = out.components[w];
    double peak = 0.0;
    for (double v : comp) peak = std::max(peak, std::abs(v));
    for (std::size_t c = 0; c < comp.size(); ++c) {
      if (std::abs(comp[c]) >= cfg.loading_ratio * peak) chosen[c] = true;
    }
  }
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (chosen[c]) out.selected.push_back(out.metrics[c]);
  }
  return out;
}

PcaInput prepare_pca_input(const correlate::FeatureDatasets& ds) {
  PcaInput in;
  const std::size_t n = ds.metric_names.size();
  std::vector<std::vector<std::optional<double>>> rows;
  for (const auto& [node, matrix] : ds.matrices) {
    for (const auto& row : matrix.rows) rows.push_back(row);
  }

  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> col;
    for (const auto& row : rows) {
      if (row[c]) col.push_back(*row[c]);
    }
    if (col.empty() || is_constant(col)) {
      in.dropped.push_back(ds.metric_names[c]);
    } else {
      keep.push_back(c);
      in.names.push_back(ds.metric_names[c]);
    }
  }
  for (const auto& row : rows) {
    std::vector<double> r;
    r.reserve(keep.size());
    bool complete = true;
    for (auto c : keep) {
      if (!row[c]) {
        complete = false;
        break;
      }
      r.push_back(*row[c]);
    }
    if (complete) in.x.push_back(std::move(r));
  }
  return in;
}

// ---------------------------------------------------------------- reductions

std::optional<double> reduce_mean(std::span<const double> series) {
  if (series.empty()) return std::nullopt;
  return stats::mean(series);
}

void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw PreconditionError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<std::complex<double>> centered_spectrum(std::span<const double> series) {
  if (series.empty()) return {};
  std::size_t size = 1;
  while (size < series.size()) size <<= 1;
  const double mu = stats::mean(series);
  std::vector<std::complex<double>> data(size);
  for (std::size_t t = 0; t < series.size(); ++t) data[t] = series[t] - mu;
  fft(data);
  return data;
}

std::optional<double> reduce_fft(std::span<const double> series) {
  if (series.size() < 2) return std::nullopt;
  const auto spec = centered_spectrum(series);
  double energy = 0.0;
  for (std::size_t r = 1; r < spec.size(); ++r) energy += std::norm(spec[r]);
  return std::sqrt(energy);
}

Normalized minmax_normalize(std::span<const double> values) {
  Normalized out;
  if (values.empty()) return out;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, max = *hi;
  out.values.reserve(values.size());
  if (max == min) {
    out.degenerate = true;
    out.values.assign(values.size(), 0.5);
    return out;
  }
  for (double v : values) out.values.push_back(std::clamp((v - min) / (max - min), 0.0, 1.0));
  return out;
}

// ---------------------------------------------------------------- outliers

std::vector<std::size_t> distance_branch(std::span<const double> normalized, const OutlierConfig& cfg) {
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double x = normalized[i];
    (std::abs(x - 1.0) < std::abs(x - 0.0) ? a : b).push_back(i);
  }
  const bool a_candidates = a.size() <= b.size();
  const auto& candidates = a_candidates ? a : b;
  const auto& larger = a_candidates ? b : a;
  if (larger.empty()) return {};

  double rep = 0.0;
  if (cfg.representative == Representative::MaxMin) {
    rep = a_candidates ? 0.0 : 1.0;
  } else {
    std::vector<double> vals;
    for (auto i : larger) vals.push_back(normalized[i]);
    rep = stats::median(vals);
  }

  std::vector<std::size_t> out;
  for (auto i : candidates) {
    if (std::abs(normalized[i] - rep) >= cfg.dmin) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool magnitude_test(std::span<const double> raw, double gap) {
  std::optional<double> lo, hi;
  for (double v : raw) {
    if (!(v > 0.0)) continue;
    const double order = std::trunc(std::log10(v));
    lo = lo ? std::min(*lo, order) : order;
    hi = hi ? std::max(*hi, order) : order;
  }
  return lo && (*lo - *hi <= -gap);
}

std::vector<std::size_t> magnitude_branch(std::span<const double> raw) {
  std::vector<double> logs;
  logs.reserve(raw.size());
  for (double v : raw) {
    if (!(v > 0.0)) throw PreconditionError("magnitude branch needs strictly positive values");
    logs.push_back(std::log10(v));
  }
  const double centre = stats::median(logs);
  std::vector<double> dist;
  dist.reserve(logs.size());
  for (double l : logs) dist.push_back(std::abs(l - centre));
  const double mean_dist = stats::mean(dist);
  const double var_dist = stats::variance(dist);

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > mean_dist && dist[i] - mean_dist > var_dist) out.push_back(i);
  }
  return out;
}

MetricOutliers detect_metric_outliers(const std::map<std::string, double>& values, const OutlierConfig& cfg) {
  MetricOutliers out;
  std::vector<std::string> nodes;
  std::vector<double> raw;
  for (const auto& [node, v] : values) {
    if (!std::isfinite(v)) continue;
    nodes.push_back(node);
    raw.push_back(v);
  }
  if (raw.size() < 3) {
    out.notes.push_back("fewer than three nodes with values");
    return out;
  }
  out.evaluable = true;

  auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double spread = *hi - *lo;
  const double scale = std::max(std::abs(stats::median(raw)), 1e-12);
  if (spread <= cfg.min_relative_spread * scale) return out;

  std::vector<std::size_t> idx;
  if (magnitude_test(raw, cfg.magnitude_gap)) {
    if (*lo > 0.0) {
      out.branch = Branch::Magnitude;
      idx = magnitude_branch(raw);
    } else {
      out.notes.push_back("magnitude branch skipped: nonpositive values");
    }
  }
  if (out.branch == Branch::None) {
    out.branch = Branch::Distance;
    const auto norm = minmax_normalize(raw);
    idx = distance_branch(norm.values, cfg);
  }
  for (auto i : idx) out.outliers.push_back(nodes[i]);
  return out;
}

std::vector<std::size_t> db_outlier_oracle(std::span<const double> values, double pct, double dmin) {
  std::vector<std::size_t> out;
  const double need = pct * static_cast<double>(values.size() - (values.empty() ? 0 : 1));
  for (std::size_t o = 0; o < values.size(); ++o) {
    std::size_t far = 0;
    for (std::size_t x = 0; x < values.size(); ++x) {
      if (x != o && std::abs(values[x] - values[o]) > dmin) ++far;
    }
    if (static_cast<double>(far) >= need - 1e-12) out.push_back(o);
  }
  return out;
}

// ---------------------------------------------------------------- pipeline

MetricDiagnosis diagnose_outlier_metrics(const correlate::FeatureDatasets& ds, const OutlierConfig& cfg) {
  MetricDiagnosis out;
  if (ds.matrices.size() < 3) {
    out.notes.push_back("fewer than three nodes with metric samples");
    return out;
  }
  out.evaluable = true;

  const PcaInput in = prepare_pca_input(ds);
  if (in.x.size() >= 2 && !in.names.empty()) {
    out.pca = pca_select_metrics(in.x, in.names, cfg);
  } else {
    out.pca.fallback = true;
    out.pca.selected = ds.metric_names;
    out.notes.push_back("PCA not possible on this stage; all metrics selected");
  }

  for (const auto& metric : out.pca.selected) {
    const auto col = static_cast<std::size_t>(
        std::find(ds.metric_names.begin(), ds.metric_names.end(), metric) - ds.metric_names.begin());
    if (col >= ds.metric_names.size()) continue;

    std::map<std::string, std::vector<double>> series;
    for (const auto& [node, matrix] : ds.matrices) {
      auto& s = series[node];
      for (const auto& row : matrix.rows) {
        if (row[col]) s.push_back(*row[col]);
      }
      if (s.empty()) series.erase(node);
    }

    std::map<std::string, double> reduced;
    if (cfg.transform == Transform::Mean) {
      for (const auto& [node, s] : series) {
        if (auto v = reduce_mean(s)) reduced[node] = *v;
      }
    } else {
      std::size_t common = std::numeric_limits<std::size_t>::max();
      for (const auto& [node, s] : series) common = std::min(common, s.size());
      for (const auto& [node, s] : series) {
        if (auto v = reduce_fft(std::span<const double>(s).first(common))) reduced[node] = *v;
      }
    }

    auto result = detect_metric_outliers(reduced, cfg);
    for (const auto& node : result.outliers) out.node_metrics[node].push_back(metric);
    out.reduced.emplace(metric, std::move(reduced));
    out.per_metric.emplace(metric, std::move(result));
  }

  // Keep per-node metric lists in canonical metric order.
  for (auto& [node, metrics] : out.node_metrics) {
    std::sort(metrics.begin(), metrics.end(), [](const std::string& a, const std::string& b) {
      return ingest::derived_metric_index(a) < ingest::derived_metric_index(b);
    });
  }
  return out;
}

}  // namespace stagelens::metric
