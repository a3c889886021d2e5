#pragma once

// Outlier-metric pipeline: PCA metric selection, per-node time-series
// reduction (mean or FFT), min-max normalization and the combined
// distance/magnitude outlier test.

#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stagelens/correlate.hpp"

namespace stagelens::metric {

enum class Transform { Mean, Fft };
enum class Representative { Median, MaxMin };
enum class PcaScaling { Standardize, Center };
enum class Branch { None, Distance, Magnitude };

std::string_view to_string(Transform t) noexcept;
std::string_view to_string(Representative r) noexcept;
std::string_view to_string(PcaScaling s) noexcept;
std::string_view to_string(Branch b) noexcept;
std::optional<Transform> parse_transform(std::string_view text) noexcept;
std::optional<Representative> parse_representative(std::string_view text) noexcept;
std::optional<PcaScaling> parse_pca_scaling(std::string_view text) noexcept;

struct OutlierConfig {
  Transform transform = Transform::Mean;
  Representative representative = Representative::MaxMin;
  double dmin = 0.6;
  double pct = 1.0;
  double ccrate = 0.95;
  double magnitude_gap = 2.0;
  /// Below this (max-min)/|median| spread of the raw reductions a metric is
  /// considered flat and yields no outliers.
  double min_relative_spread = 0.3;
  /// A component selects every metric whose |loading| reaches this fraction
  /// of the component's largest |loading| (1 keeps only the argmax).
  double loading_ratio = 0.5;
  PcaScaling pca_scaling = PcaScaling::Standardize;

  void validate() const;
};

using Matrix = std::vector<std::vector<double>>;  // row-major, rows = samples

/// Column-scaled scatter matrix (1/m) Z^T Z that PCA decomposes. Z is X with
/// centered columns, additionally divided by the column std when standardizing.
Matrix covariance_matrix(const Matrix& x, PcaScaling scaling);

struct PcaSelection {
  std::vector<std::string> metrics;  // columns that entered the decomposition
  std::vector<double> eigenvalues;   // descending
  Matrix components;                 // components[w][c]: loading of metric c
  std::size_t d = 0;
  std::vector<std::string> selected;  // canonical (column) order
  bool fallback = false;              // no variance: every metric selected
  std::vector<std::string> notes;

  /// CCRate_k for k retained components (k = 0 gives 0).
  double cumulative_rate(std::size_t k) const;
};

/// Decomposes the scatter matrix of `x` (columns named by `names`) and keeps
/// the smallest d with CCRate_d >= ccrate. Requires at least two rows.
PcaSelection pca_select_metrics(const Matrix& x, const std::vector<std::string>& names, const OutlierConfig& cfg);

/// Builds the PCA input from a stage's metric matrices: rows of every node
/// concatenated, columns that are entirely missing or constant dropped, then
/// rows with any remaining missing cell dropped.
struct PcaInput {
  Matrix x;
  std::vector<std::string> names;
  std::vector<std::string> dropped;
};
PcaInput prepare_pca_input(const correlate::FeatureDatasets& ds);

std::optional<double> reduce_mean(std::span<const double> series);

/// In-place iterative radix-2 FFT. The size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

/// DFT coefficients of the centered series zero-padded to the next power of two.
std::vector<std::complex<double>> centered_spectrum(std::span<const double> series);

/// L2 norm of the non-DC DFT magnitudes of the centered series; missing for
/// fewer than two samples.
std::optional<double> reduce_fft(std::span<const double> series);

struct Normalized {
  std::vector<double> values;
  bool degenerate = false;  // max == min, every value mapped to 0.5
};

Normalized minmax_normalize(std::span<const double> values);

/// Distance branch on normalized values; returns indices of outliers.
std::vector<std::size_t> distance_branch(std::span<const double> normalized, const OutlierConfig& cfg);

/// Magnitude branch on strictly positive raw values; returns outlier indices.
std::vector<std::size_t> magnitude_branch(std::span<const double> raw);

/// True when the positive values span at least `gap` whole decades.
bool magnitude_test(std::span<const double> raw, double gap);

struct MetricOutliers {
  bool evaluable = false;
  Branch branch = Branch::None;
  std::vector<std::string> outliers;  // node name order
  std::vector<std::string> notes;
};

/// `values` maps node -> reduced raw value for one metric.
MetricOutliers detect_metric_outliers(const std::map<std::string, double>& values, const OutlierConfig& cfg);

/// DB(pct, dmin): o is an outlier when at least pct*(n-1) other points lie
/// farther than dmin from it. Brute force.
std::vector<std::size_t> db_outlier_oracle(std::span<const double> values, double pct, double dmin);

struct MetricDiagnosis {
  bool evaluable = false;
  PcaSelection pca;
  std::map<std::string, std::map<std::string, double>> reduced;  // metric -> node -> value
  std::map<std::string, MetricOutliers> per_metric;
  std::map<std::string, std::vector<std::string>> node_metrics;  // node -> metrics, canonical order
  std::vector<std::string> notes;
};

MetricDiagnosis diagnose_outlier_metrics(const correlate::FeatureDatasets& ds, const OutlierConfig& cfg);

}  // namespace stagelens::metric
