#pragma once

// Application-level detectors: workload imbalance, skewed input sizes,
// uneven data placement and straggler nodes.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stagelens/correlate.hpp"
#include "stagelens/trace.hpp"

namespace stagelens::app {

enum class Verdict { Balanced, Unbalanced, NotEvaluable };

std::string_view to_string(Verdict verdict) noexcept;

struct ImbalanceConfig {
  double balance_coefficient = 0.1;  // BC, in (0,1)
  double job_ratio_threshold = 0.6;  // Th_UB, in (0,1]

  void validate() const;
};

struct NodeTilt {
  std::string node;
  double diff = 0.0;  // count - mean
  double tilt = 0.0;  // | |diff| - BC*mean |
  bool flagged = false;
};

struct StageImbalance {
  Verdict verdict = Verdict::NotEvaluable;
  double mean = 0.0;
  double total_abs_diff = 0.0;
  double node_tolerance = 0.0;   // BC * mean
  double stage_tolerance = 0.0;  // BC * mean * p
  std::vector<NodeTilt> ranking;  // tilt descending, node name ascending on ties
};

/// `task_counts` holds every node of the cluster (p = its size).
StageImbalance detect_workload_imbalance(const std::map<std::string, std::size_t>& task_counts,
                                         const ImbalanceConfig& cfg);

struct JobImbalance {
  Verdict verdict = Verdict::NotEvaluable;
  std::size_t unbalanced_stages = 0;
  std::size_t evaluable_stages = 0;
  double ratio = 0.0;  // Ratio_UB
};

/// Ratio_UB over the job's evaluable stages; unbalanced when it exceeds Th_UB.
JobImbalance judge_job_imbalance(std::span<const StageImbalance> stages, const ImbalanceConfig& cfg);

struct SkewConfig {
  double size_ratio_threshold = 1.5;  // Th_size, > 1
  bool flag_small = false;            // also flag median/size > Th_size

  void validate() const;
};

struct SkewedTask {
  std::string node;
  std::string task_id;
  double ratio = 0.0;
};

struct SkewedNode {
  std::string node;
  double ratio = 0.0;
};

struct SkewResult {
  bool evaluable = false;
  double median = 0.0;
  std::vector<SkewedTask> tasks;
  std::vector<SkewedNode> nodes;  // node name order
};

SkewResult detect_skew_data_size(std::span<const correlate::TaskDataSize> data, const SkewConfig& cfg);

struct PlacementConfig {
  std::map<Locality, double> priorities = {
      {Locality::ProcessLocal, 0.0}, {Locality::NodeLocal, 1.0}, {Locality::RackLocal, 1.0},
      {Locality::Any, 2.0},          {Locality::OffSwitch, 2.0}, {Locality::Unknown, 1.0}};
  double z = 1.96;

  double priority(Locality l) const;
  void validate() const;
};

struct PlacementEntry {
  std::string node;
  Locality locality = Locality::Unknown;
  std::size_t outliers = 0;
  double ratio = 0.0;
};

struct PlacementResult {
  bool evaluable = false;
  double median_runtime = 0.0;
  double std_runtime = 0.0;
  double mean_abs_distance = 0.0;
  std::vector<std::string> outlier_tasks;
  std::vector<PlacementEntry> entries;  // ratio descending, then node, then locality
};

/// Long-runtime outliers are counted per (node, locality) and weighted by
/// the locality priority over `total_tasks`.
PlacementResult detect_uneven_placement(std::span<const correlate::TaskLocality> tasks, const PlacementConfig& cfg,
                                        std::size_t total_tasks);

struct StragglerConfig {
  double runtime_ratio_threshold = 1.5;  // Th_D

  void validate() const;
};

struct StragglerResult {
  bool evaluable = false;
  double median = 0.0;
  std::vector<SkewedNode> nodes;  // flagged nodes with mean/median ratio
};

/// Flags nodes whose mean task runtime exceeds Th_D times the median of the
/// per-node means.
StragglerResult detect_stragglers(const std::map<std::string, double>& mean_runtime, const StragglerConfig& cfg);

}  // namespace stagelens::app
