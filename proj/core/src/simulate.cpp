#include "stagelens/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "stagelens/error.hpp"
#include "stagelens/ingest.hpp"

namespace stagelens::sim {

namespace {

constexpr TimestampMs kEpoch = 1'600'000'000'000;
constexpr DurationMs kStageGapMs = 2000;
constexpr double kBlockBytes = 128.0 * 1024 * 1024;
constexpr double kRatioCap = 0.95;

constexpr std::pair<FaultKind, std::string_view> kFaultNames[] = {
    {FaultKind::SlowNode, "SlowNode"},
    {FaultKind::DiskFill, "DiskFill"},
    {FaultKind::StressInterference, "StressInterference"},
    {FaultKind::CacheFlush, "CacheFlush"},
    {FaultKind::UnevenPlacement, "UnevenPlacement"},
    {FaultKind::SkewDataSize, "SkewDataSize"},
    {FaultKind::TaskImbalance, "TaskImbalance"},
};

bool is_ratio(std::string_view metric) {
  return metric == "cpu_usage" || metric == "mem_usage" || metric == "ioWaitRatio" || metric.ends_with("_Ratio");
}

}  // namespace

std::string_view to_string(FaultKind kind) noexcept {
  for (const auto& [k, name] : kFaultNames) {
    if (k == kind) return name;
  }
  return "SlowNode";
}

std::optional<FaultKind> parse_fault_kind(std::string_view text) noexcept {
  for (const auto& [k, name] : kFaultNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::map<std::string, double> default_baseline() {
  return {
      {"cpu_usage", 0.2},    {"mem_usage", 0.4},    {"ioWaitRatio", 0.02}, {"weighted_io", 40.0},
      {"diskR_band", 3.0e7}, {"diskW_band", 7.5e6}, {"netS_band", 6.0e6},  {"netR_band", 6.0e6},
      {"IPC", 1.2},          {"L2_MPKI", 6.0},      {"L3_MPKI", 1.5},      {"L1I_MPKI", 3.0},
      {"ITLB_MPKI", 0.3},    {"DTLB_MPKI", 0.8},    {"MUL_Ratio", 0.02},   {"DIV_Ratio", 0.005},
      {"FP_Ratio", 0.08},    {"LOAD_Ratio", 0.28},  {"STORE_Ratio", 0.12}, {"BR_Ratio", 0.18},
  };
}

std::vector<std::string> numbered_nodes(std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= count; ++i) {
    std::string id = std::to_string(i);
    out.push_back("hw" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id);
  }
  return out;
}

void ScenarioSpec::validate() const {
  if (nodes.size() < 2) throw ConfigError("scenario " + name + ": at least two nodes required");
  std::set<std::string> known(nodes.begin(), nodes.end());
  if (known.size() != nodes.size()) throw ConfigError("scenario " + name + ": duplicate node names");
  if (jobs == 0 || stages_per_job == 0 || tasks_per_stage == 0 || slots_per_node == 0)
    throw ConfigError("scenario " + name + ": jobs, stages, tasks and slots must be positive");
  if (!(metric_rate_hz > 0.0)) throw ConfigError("scenario " + name + ": metric rate must be positive");
  if (!(base_runtime_ms > 0.0)) throw ConfigError("scenario " + name + ": base runtime must be positive");
  if (!(runtime_jitter >= 0.0 && runtime_jitter < 1.0))
    throw ConfigError("scenario " + name + ": runtime jitter must lie in [0,1)");
  if (!(metric_cv >= 0.0 && metric_cv < 0.5)) throw ConfigError("scenario " + name + ": metric cv must lie in [0,0.5)");
  if (!(node_offset >= 0.0 && node_offset < 0.5))
    throw ConfigError("scenario " + name + ": node offset must lie in [0,0.5)");
  if (!(node_local_fraction >= 0.0 && node_local_fraction <= 1.0))
    throw ConfigError("scenario " + name + ": node_local_fraction must lie in [0,1]");
  for (const auto& [metric, level] : baseline) {
    if (ingest::derived_metric_index(metric) < 0) throw ConfigError("scenario " + name + ": unknown metric " + metric);
    if (!(level >= 0.0) || !std::isfinite(level))
      throw ConfigError("scenario " + name + ": baseline for " + metric + " must be finite and >= 0");
  }
  const auto ids = stage_ids();
  const std::set<std::string> stage_set(ids.begin(), ids.end());
  for (const auto& f : faults) {
    if (!(f.intensity > 0.0) || !std::isfinite(f.intensity))
      throw ConfigError("scenario " + name + ": fault intensity must be positive");
    if (f.targets.empty()) throw ConfigError("scenario " + name + ": fault without target");
    for (const auto& t : f.targets) {
      if (!known.contains(t)) throw ConfigError("scenario " + name + ": fault targets unknown node '" + t + "'");
    }
    for (const auto& s : f.stages) {
      if (!stage_set.contains(s)) throw ConfigError("scenario " + name + ": fault names unknown stage '" + s + "'");
    }
  }
}

std::vector<std::string> ScenarioSpec::stage_ids() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < jobs; ++j) {
    for (std::size_t s = 0; s < stages_per_job; ++s) out.push_back(std::to_string(j) + "_" + std::to_string(s));
  }
  return out;
}

namespace {

/// Effect of every fault active on one (stage, node).
struct NodeEffect {
  double runtime = 1.0;
  std::size_t slots = 0;  // 0: unchanged
  bool any_locality = false;
  double skew = 1.0;  // data size multiplier for the skewed tasks
  std::map<std::string, double> scale;
  double disk_divisor = 1.0;  // diskR / divisor, lost volume moved to netR
  double cache_wave = 0.0;    // relative amplitude of the periodic L3 term
  std::set<Label> labels;
};

bool applies(const FaultSpec& f, const std::string& stage, const std::string& node) {
  if (std::find(f.targets.begin(), f.targets.end(), node) == f.targets.end()) return false;
  return f.stages.empty() || std::find(f.stages.begin(), f.stages.end(), stage) != f.stages.end();
}

void mul(NodeEffect& e, const std::string& metric, double factor) {
  auto [it, inserted] = e.scale.emplace(metric, 1.0);
  it->second *= factor;
}

void label_metric(NodeEffect& e, std::string metric) { e.labels.insert({FindingKind::OutlierMetric, std::move(metric)}); }

NodeEffect effect_for(const ScenarioSpec& spec, const std::string& stage, const std::string& node) {
  NodeEffect e;
  for (const auto& f : spec.faults) {
    if (!applies(f, stage, node)) continue;
    const double k = f.intensity;
    switch (f.kind) {
      case FaultKind::SlowNode:
        e.runtime *= k;
        mul(e, "IPC", 1.0 / k);
        label_metric(e, "IPC");
        break;
      case FaultKind::DiskFill:
        e.runtime *= 1.0 + (k - 1.0) / 4.0;
        e.disk_divisor *= k;
        mul(e, "weighted_io", k);
        mul(e, "ioWaitRatio", k);
        mul(e, "cpu_usage", 1.0 / std::sqrt(k));
        e.labels.insert({FindingKind::AbnormalNode, ""});
        for (auto m : {"cpu_usage", "ioWaitRatio", "weighted_io", "diskR_band", "netR_band"}) label_metric(e, m);
        break;
      case FaultKind::StressInterference:
        e.runtime *= 1.0 + (k - 1.0) / 2.0;
        for (auto m : {"cpu_usage", "mem_usage", "ioWaitRatio", "weighted_io"}) {
          mul(e, m, k);
          label_metric(e, m);
        }
        break;
      case FaultKind::CacheFlush:
        e.runtime *= 1.0 + (k - 1.0) / 2.0;
        mul(e, "L3_MPKI", k);
        e.cache_wave = 0.3;
        label_metric(e, "L3_MPKI");
        break;
      case FaultKind::UnevenPlacement:
        e.runtime *= k;
        e.any_locality = true;
        e.disk_divisor *= k;
        e.labels.insert({FindingKind::UnevenPlacement, ""});
        e.labels.insert({FindingKind::AbnormalNode, ""});
        label_metric(e, "diskR_band");
        label_metric(e, "netR_band");
        break;
      case FaultKind::SkewDataSize:
        e.skew *= k;
        if (k > 1.5) e.labels.insert({FindingKind::SkewDataSize, ""});
        break;
      case FaultKind::TaskImbalance:
        e.slots = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(spec.slots_per_node) / k));
        e.labels.insert({FindingKind::WorkloadImbalance, ""});
        break;
    }
  }
  // A node is labelled a straggler only when its injected slowdown exceeds
  // the default straggler ratio.
  if (e.runtime > 1.5) e.labels.insert({FindingKind::Straggler, ""});
  return e;
}

struct Slot {
  TimestampMs free_at;
  std::size_t node;
  std::size_t slot;

  bool operator>(const Slot& o) const { return std::tie(free_at, node, slot) > std::tie(o.free_at, o.node, o.slot); }
};

}  // namespace

Generated generate_trace(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Generated out;
  Trace& trace = out.trace;
  trace.cluster = spec.nodes;
  const std::size_t p = spec.nodes.size();
  const auto& metric_defs = ingest::derived_metrics();

  // Fixed per-node level offsets.
  std::vector<std::map<std::string, double>> offsets(p);
  for (std::size_t n = 0; n < p; ++n) {
    for (const auto& m : metric_defs) offsets[n][std::string(m.name)] = rng.uniform(1.0 - spec.node_offset, 1.0 + spec.node_offset);
  }

  struct Window {
    TimestampMs start, finish;
    std::vector<NodeEffect> effects;
  };
  std::vector<Window> windows;

  TimestampMs clock = kEpoch;
  for (std::size_t j = 0; j < spec.jobs; ++j) {
    Job job;
    job.job_id = std::to_string(j);
    for (std::size_t s = 0; s < spec.stages_per_job; ++s) {
      Stage stage;
      stage.job_id = job.job_id;
      stage.stage_id = job.job_id + "_" + std::to_string(s);

      std::vector<NodeEffect> effects;
      for (const auto& node : spec.nodes) effects.push_back(effect_for(spec, stage.stage_id, node));

      std::vector<Slot> heap;
      for (std::size_t n = 0; n < p; ++n) {
        const std::size_t slots = effects[n].slots ? effects[n].slots : spec.slots_per_node;
        for (std::size_t k = 0; k < slots; ++k) heap.push_back({clock, n, k});
      }
      std::make_heap(heap.begin(), heap.end(), std::greater<>());

      std::vector<std::size_t> skew_left(p, 3);
      for (std::size_t t = 0; t < spec.tasks_per_stage; ++t) {
        std::pop_heap(heap.begin(), heap.end(), std::greater<>());
        Slot slot = heap.back();
        heap.pop_back();
        const NodeEffect& e = effects[slot.node];

        Task task;
        task.task_id = std::to_string(t);
        task.stage_id = stage.stage_id;
        task.node = spec.nodes[slot.node];
        task.launch_time = slot.free_at;
        const double jitter = rng.uniform(1.0 - spec.runtime_jitter, 1.0 + spec.runtime_jitter);
        const auto runtime = static_cast<DurationMs>(std::llround(spec.base_runtime_ms * jitter * e.runtime));
        task.finish_time = task.launch_time + std::max<DurationMs>(runtime, 1);
        task.data_size = std::round(kBlockBytes * rng.uniform(0.9, 1.0));
        const double loc_draw = rng.uniform();
        if (e.any_locality) {
          task.locality = Locality::Any;
        } else {
          task.locality = loc_draw < spec.node_local_fraction ? Locality::NodeLocal : Locality::ProcessLocal;
        }
        if (e.skew != 1.0 && skew_left[slot.node] > 0) {
          --skew_left[slot.node];
          task.data_size = std::round(task.data_size * e.skew);
        }
        task.succeeded = true;

        slot.free_at = task.finish_time;
        heap.push_back(slot);
        std::push_heap(heap.begin(), heap.end(), std::greater<>());
        stage.tasks.push_back(std::move(task));
      }

      const TimestampMs start = stage.start_time();
      const TimestampMs finish = stage.finish_time();
      for (std::size_t n = 0; n < p; ++n) {
        if (effects[n].labels.empty()) continue;
        LabeledAnomaly la;
        la.stage_id = stage.stage_id;
        la.node = spec.nodes[n];
        la.expected.assign(effects[n].labels.begin(), effects[n].labels.end());
        out.labels.push_back(std::move(la));
      }
      windows.push_back({start, finish, std::move(effects)});
      clock = finish + kStageGapMs;
      job.stages.push_back(std::move(stage));
    }
    trace.jobs.push_back(std::move(job));
  }

  // Metric samples cover the whole run; outside stage windows nodes idle.
  const TimestampMs end = clock;
  const double period_ms = 1000.0 / spec.metric_rate_hz;
  const double noise = spec.metric_cv * std::sqrt(3.0);
  for (std::size_t n = 0; n < p; ++n) {
    auto& series = trace.metrics[spec.nodes[n]];
    std::size_t w = 0;
    for (std::size_t i = 0;; ++i) {
      const TimestampMs ts = kEpoch + static_cast<TimestampMs>(std::llround(static_cast<double>(i) * period_ms));
      if (ts > end) break;
      while (w < windows.size() && windows[w].finish < ts) ++w;
      const bool busy = w < windows.size() && windows[w].start <= ts;

      MetricSample sample;
      sample.node = spec.nodes[n];
      sample.timestamp = ts;
      std::map<std::string, double> level;
      for (const auto& m : metric_defs) {
        const std::string name(m.name);
        auto it = spec.baseline.find(name);
        double v = it == spec.baseline.end() ? 0.0 : it->second;
        if (!busy && m.layer == ingest::MetricLayer::System && name != "mem_usage") v *= 0.25;
        level[name] = v * offsets[n].at(name);
      }
      if (busy) {
        const NodeEffect& e = windows[w].effects[n];
        for (const auto& [name, f] : e.scale) level[name] *= f;
        if (e.disk_divisor != 1.0) {
          const double moved = level["diskR_band"] * (1.0 - 1.0 / e.disk_divisor);
          level["diskR_band"] -= moved;
          level["netR_band"] += moved;
        }
        if (e.cache_wave > 0.0) {
          const double phase = 2.0 * std::numbers::pi * static_cast<double>(ts - windows[w].start) / 20000.0;
          level["L3_MPKI"] *= 1.0 + e.cache_wave * std::sin(phase);
        }
      }
      for (const auto& m : metric_defs) {
        const std::string name(m.name);
        double v = level[name] * rng.uniform(1.0 - noise, 1.0 + noise);
        if (is_ratio(name)) v = std::min(v, kRatioCap);
        sample.values[name] = v;
      }
      series.push_back(std::move(sample));
    }
  }
  return out;
}

namespace {

ScenarioSpec case_spec(std::string name, std::uint64_t seed) {
  ScenarioSpec s;
  s.name = std::move(name);
  s.seed = seed;
  s.nodes = {"hw062", "hw073", "hw089", "hw103", "hw106", "hw114"};
  s.tasks_per_stage = 320;
  return s;
}

}  // namespace

std::vector<std::string_view> preset_names() { return {"case1", "case2", "case3", "eval-corpus"}; }

std::vector<ScenarioSpec> preset(std::string_view name, std::uint64_t seed) {
  if (name == "case1") {
    auto s = case_spec("case1", seed);
    s.faults.push_back({FaultKind::UnevenPlacement, {"hw114"}, 8.0, {}});
    return {s};
  }
  if (name == "case2") {
    auto s = case_spec("case2", seed);
    s.faults.push_back({FaultKind::DiskFill, {"hw089"}, 6.0, {}});
    return {s};
  }
  if (name == "case3") {
    auto s = case_spec("case3", seed);
    s.faults.push_back({FaultKind::CacheFlush, {"hw062", "hw106"}, 3.0, {}});
    return {s};
  }
  if (name == "eval-corpus") {
    Rng rng(seed);
    std::vector<ScenarioSpec> out;
    for (std::size_t i = 0; i < 50; ++i) {
      ScenarioSpec s;
      s.name = "eval-" + std::to_string(i);
      s.seed = rng.next();
      s.nodes = numbered_nodes(6);
      s.stages_per_job = 2;
      s.tasks_per_stage = 160;
      const auto first = kAllFaultKinds[i % std::size(kAllFaultKinds)];
      std::vector<std::string> free = s.nodes;
      auto take = [&] {
        const std::size_t k = rng.index(free.size());
        std::string node = free[k];
        free.erase(free.begin() + static_cast<std::ptrdiff_t>(k));
        return node;
      };
      s.faults.push_back({first, {take()}, rng.uniform(2.5, 6.0), {}});
      if (rng.uniform() < 0.3) {
        const auto second = kAllFaultKinds[rng.index(std::size(kAllFaultKinds))];
        s.faults.push_back({second, {take()}, rng.uniform(2.5, 6.0), {}});
      }
      out.push_back(std::move(s));
    }
    return out;
  }
  std::string known;
  for (auto n : preset_names()) known += (known.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

void save_labels(const std::vector<LabeledAnomaly>& labels, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << nlohmann::ordered_json{{"schema", kTraceSchema}, {"kind", "label"}}.dump() << '\n';
  for (const auto& la : labels) {
    nlohmann::ordered_json expected = nlohmann::ordered_json::array();
    for (const auto& l : la.expected) {
      nlohmann::ordered_json e;
      e["finding"] = to_string(l.kind);
      if (!l.metric.empty()) e["metric"] = l.metric;
      expected.push_back(std::move(e));
    }
    nlohmann::ordered_json line;
    line["stage_id"] = la.stage_id;
    line["node"] = la.node;
    line["expected"] = std::move(expected);
    out << line.dump() << '\n';
  }
  out.close();
  if (!out) throw IoError("failed writing " + file.string());
}

std::vector<LabeledAnomaly> load_labels(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  const std::string name = file.filename().string();
  std::vector<LabeledAnomaly> out;
  std::string text;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(name, line, "line is not a JSON object");
    if (!header) {
      if (j.value("schema", "") != kTraceSchema || j.value("kind", "") != "label")
        throw ParseError(name, line, "first line must be the label schema header");
      header = true;
      continue;
    }
    try {
      LabeledAnomaly la;
      la.stage_id = j.at("stage_id").get<std::string>();
      la.node = j.at("node").get<std::string>();
      for (const auto& e : j.at("expected")) {
        auto kind = parse_finding_kind(e.at("finding").get<std::string>());
        if (!kind) throw ParseError(name, line, "unknown finding kind");
        la.expected.push_back({*kind, e.value("metric", "")});
      }
      std::sort(la.expected.begin(), la.expected.end());
      out.push_back(std::move(la));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(name, line, e.what());
    }
  }
  if (!header) throw ParseError(name, line, "missing schema header");
  return out;
}

}  // namespace stagelens::sim
