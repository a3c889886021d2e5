#include "stagelens/app_detect.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "stagelens/error.hpp"
#include "stagelens/stats.hpp"

namespace stagelens::app {

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::Balanced: return "balanced";
    case Verdict::Unbalanced: return "unbalanced";
    case Verdict::NotEvaluable: return "not evaluable";
  }
  return "not evaluable";
}

void ImbalanceConfig::validate() const {
  if (!(balance_coefficient > 0.0 && balance_coefficient < 1.0))
    throw ConfigError("bc must lie in (0,1)");
  if (!(job_ratio_threshold > 0.0 && job_ratio_threshold <= 1.0))
    throw ConfigError("th_ub must lie in (0,1]");
}

StageImbalance detect_workload_imbalance(const std::map<std::string, std::size_t>& task_counts,
                                         const ImbalanceConfig& cfg) {
  StageImbalance out;
  const double p = static_cast<double>(task_counts.size());
  if (task_counts.empty()) return out;

  double total = 0.0;
  for (const auto& [node, n] : task_counts) total += static_cast<double>(n);
  out.mean = total / p;
  if (out.mean == 0.0) return out;

  out.node_tolerance = cfg.balance_coefficient * out.mean;
  out.stage_tolerance = out.node_tolerance * p;
  for (const auto& [node, n] : task_counts) {
    NodeTilt t;
    t.node = node;
    t.diff = static_cast<double>(n) - out.mean;
    t.tilt = std::abs(std::abs(t.diff) - out.node_tolerance);
    t.flagged = std::abs(t.diff) > out.node_tolerance;
    out.total_abs_diff += std::abs(t.diff);
    out.ranking.push_back(std::move(t));
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [](const NodeTilt& a, const NodeTilt& b) {
    if (a.tilt != b.tilt) return a.tilt > b.tilt;
    return a.node < b.node;
  });
  out.verdict = out.total_abs_diff > out.stage_tolerance ? Verdict::Unbalanced : Verdict::Balanced;
  return out;
}

JobImbalance judge_job_imbalance(std::span<const StageImbalance> stages, const ImbalanceConfig& cfg) {
  JobImbalance out;
  for (const auto& s : stages) {
    if (s.verdict == Verdict::NotEvaluable) continue;
    ++out.evaluable_stages;
    if (s.verdict == Verdict::Unbalanced) ++out.unbalanced_stages;
  }
  if (out.evaluable_stages == 0) return out;
  out.ratio = static_cast<double>(out.unbalanced_stages) / static_cast<double>(out.evaluable_stages);
  out.verdict = out.ratio > cfg.job_ratio_threshold ? Verdict::Unbalanced : Verdict::Balanced;
  return out;
}

void SkewConfig::validate() const {
  if (!(size_ratio_threshold > 1.0)) throw ConfigError("th_size must be greater than 1");
}

SkewResult detect_skew_data_size(std::span<const correlate::TaskDataSize> data, const SkewConfig& cfg) {
  SkewResult out;
  std::vector<double> sizes;
  sizes.reserve(data.size());
  for (const auto& d : data) sizes.push_back(d.data_size);
  if (sizes.empty()) return out;
  out.median = stats::median(sizes);
  if (!(out.median > 0.0)) return out;
  out.evaluable = true;

  auto skewed = [&](double value) {
    if (value / out.median > cfg.size_ratio_threshold) return true;
    return cfg.flag_small && value > 0.0 && out.median / value > cfg.size_ratio_threshold;
  };

  std::map<std::string, std::pair<double, std::size_t>> per_node;
  for (const auto& d : data) {
    if (skewed(d.data_size)) out.tasks.push_back({d.node, d.task_id, d.data_size / out.median});
    auto& [sum, n] = per_node[d.node];
    sum += d.data_size;
    ++n;
  }
  for (const auto& [node, p] : per_node) {
    const double node_mean = p.first / static_cast<double>(p.second);
    if (skewed(node_mean)) out.nodes.push_back({node, node_mean / out.median});
  }
  return out;
}

double PlacementConfig::priority(Locality l) const {
  auto it = priorities.find(l);
  return it == priorities.end() ? 0.0 : it->second;
}

void PlacementConfig::validate() const {
  for (const auto& [loc, w] : priorities) {
    if (!std::isfinite(w) || w < 0.0)
      throw ConfigError("priority for " + std::string(stagelens::to_string(loc)) + " must be finite and >= 0");
  }
  if (!(z > 0.0)) throw ConfigError("placement z must be positive");
}

PlacementResult detect_uneven_placement(std::span<const correlate::TaskLocality> tasks, const PlacementConfig& cfg,
                                        std::size_t total_tasks) {
  PlacementResult out;
  if (tasks.size() < 2 || total_tasks == 0) return out;
  out.evaluable = true;

  std::vector<double> runtimes;
  runtimes.reserve(tasks.size());
  for (const auto& t : tasks) runtimes.push_back(static_cast<double>(t.runtime));
  out.median_runtime = stats::median(runtimes);
  out.std_runtime = stats::stddev(runtimes);
  if (out.std_runtime == 0.0) return out;

  std::vector<double> dis(runtimes.size());
  double abs_sum = 0.0;
  for (std::size_t j = 0; j < runtimes.size(); ++j) {
    dis[j] = runtimes[j] - out.median_runtime;
    abs_sum += std::abs(dis[j]);
  }
  out.mean_abs_distance = abs_sum / static_cast<double>(dis.size());

  std::map<std::pair<std::string, Locality>, std::size_t> counts;
  for (std::size_t j = 0; j < dis.size(); ++j) {
    const double a = std::abs(dis[j]);
    const bool suspicious = a > out.mean_abs_distance;
    if (suspicious && dis[j] > 0 && std::abs(a - out.mean_abs_distance) > out.std_runtime * cfg.z) {
      out.outlier_tasks.push_back(tasks[j].task_id);
      ++counts[{tasks[j].node, tasks[j].locality}];
    }
  }

  for (const auto& [key, n] : counts) {
    const double ratio = static_cast<double>(n) / static_cast<double>(total_tasks) * cfg.priority(key.second);
    if (ratio > 0.0) out.entries.push_back({key.first, key.second, n, ratio});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const PlacementEntry& a, const PlacementEntry& b) {
    return std::tie(b.ratio, a.node, a.locality) < std::tie(a.ratio, b.node, b.locality);
  });
  return out;
}

void StragglerConfig::validate() const {
  if (!(runtime_ratio_threshold > 0.0)) throw ConfigError("th_d must be positive");
}

StragglerResult detect_stragglers(const std::map<std::string, double>& mean_runtime, const StragglerConfig& cfg) {
  StragglerResult out;
  if (mean_runtime.size() < 2) return out;
  std::vector<double> means;
  for (const auto& [node, m] : mean_runtime) means.push_back(m);
  out.median = stats::median(means);
  if (!(out.median > 0.0)) return out;
  out.evaluable = true;
  for (const auto& [node, m] : mean_runtime) {
    if (m > cfg.runtime_ratio_threshold * out.median) out.nodes.push_back({node, m / out.median});
  }
  return out;
}

}  // namespace stagelens::app
