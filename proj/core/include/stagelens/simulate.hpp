#pragma once

// Deterministic synthetic traces with labelled fault injection.
//
// All randomness comes from one std::mt19937_64 seeded with the scenario
// seed; doubles are formed as (next() >> 11) * 2^-53, so output depends on
// the seed alone and not on the standard library's distributions.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stagelens/finding.hpp"
#include "stagelens/trace.hpp"

namespace stagelens::sim {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 gen_;
};

enum class FaultKind { SlowNode, DiskFill, StressInterference, CacheFlush, UnevenPlacement, SkewDataSize, TaskImbalance };

inline constexpr FaultKind kAllFaultKinds[] = {FaultKind::SlowNode,        FaultKind::DiskFill,
                                               FaultKind::StressInterference, FaultKind::CacheFlush,
                                               FaultKind::UnevenPlacement, FaultKind::SkewDataSize,
                                               FaultKind::TaskImbalance};

std::string_view to_string(FaultKind kind) noexcept;
std::optional<FaultKind> parse_fault_kind(std::string_view text) noexcept;

struct FaultSpec {
  FaultKind kind = FaultKind::SlowNode;
  std::vector<std::string> targets;
  double intensity = 2.0;
  std::vector<std::string> stages;  // empty: every stage
};

/// Default per-metric mean levels of a busy, healthy node.
std::map<std::string, double> default_baseline();

struct ScenarioSpec {
  std::string name = "custom";
  std::uint64_t seed = 1;
  std::vector<std::string> nodes;
  std::size_t jobs = 1;
  std::size_t stages_per_job = 1;
  std::size_t tasks_per_stage = 320;
  std::size_t slots_per_node = 4;
  double metric_rate_hz = 1.0;
  double base_runtime_ms = 10000.0;
  double runtime_jitter = 0.15;       // runtimes ~ base * U(1-j, 1+j)
  double metric_cv = 0.1;             // per-sample multiplicative noise
  double node_offset = 0.02;          // fixed per-node, per-metric level offset
  double node_local_fraction = 0.0;   // healthy tasks reported NODE_LOCAL
  std::map<std::string, double> baseline = default_baseline();
  std::vector<FaultSpec> faults;

  /// Throws ConfigError naming the first problem.
  void validate() const;
  /// Stage ids in generation order ("<job>_<stage>").
  std::vector<std::string> stage_ids() const;
};

/// Node names hw001..hwNNN.
std::vector<std::string> numbered_nodes(std::size_t count);

struct Label {
  FindingKind kind = FindingKind::Straggler;
  std::string metric;  // OutlierMetric only

  friend bool operator==(const Label&, const Label&) = default;
  friend auto operator<=>(const Label&, const Label&) = default;
};

struct LabeledAnomaly {
  std::string stage_id;
  std::string node;
  std::vector<Label> expected;  // sorted, unique

  friend bool operator==(const LabeledAnomaly&, const LabeledAnomaly&) = default;
};

struct Generated {
  Trace trace;
  std::vector<LabeledAnomaly> labels;  // by stage, then node
};

Generated generate_trace(const ScenarioSpec& spec);

/// Known presets: case1, case2, case3 (one scenario each) and eval-corpus
/// (50 scenarios). Throws ConfigError listing the presets otherwise.
std::vector<ScenarioSpec> preset(std::string_view name, std::uint64_t seed = 1);
std::vector<std::string_view> preset_names();

inline constexpr std::string_view kLabelsFile = "labels.jsonl";

void save_labels(const std::vector<LabeledAnomaly>& labels, const std::filesystem::path& file);
std::vector<LabeledAnomaly> load_labels(const std::filesystem::path& file);

}  // namespace stagelens::sim
