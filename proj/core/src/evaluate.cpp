#include "stagelens/evaluate.hpp"

#include <algorithm>
#include <set>

#include "stagelens/report.hpp"

namespace stagelens::eval {

Score make_score(std::size_t successes, std::size_t alarms, std::size_t outliers) {
  Score s;
  s.successes = successes;
  s.alarms = alarms;
  s.outliers = outliers;
  if (alarms == 0) {
    s.degenerate = true;
    s.precision = outliers == 0 ? 1.0 : 0.0;
  } else {
    s.precision = static_cast<double>(successes) / static_cast<double>(alarms);
  }
  s.recall = outliers == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(outliers);
  const double sum = s.precision + s.recall;
  s.accuracy = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

namespace {

bool wanted(FindingKind kind, const ScoreOptions& opts) { return !opts.kind || *opts.kind == kind; }

std::string metric_part(FindingKind kind, const std::string& metric, const ScoreOptions& opts) {
  return kind == FindingKind::OutlierMetric && !opts.per_node ? metric : std::string();
}

std::vector<MatchKey> unique(std::set<MatchKey> keys) { return {keys.begin(), keys.end()}; }

}  // namespace

std::vector<MatchKey> alarm_keys(std::span<const Finding> findings, const ScoreOptions& opts) {
  std::set<MatchKey> keys;
  for (const auto& f : findings) {
    if (!wanted(f.kind, opts)) continue;
    const std::vector<std::string> none{""};
    const auto& nodes = f.nodes.empty() ? none : f.nodes;
    const auto& metrics = f.metrics.empty() ? none : f.metrics;
    for (const auto& n : nodes) {
      for (const auto& m : metrics) keys.emplace(f.kind, f.stage_id, n, metric_part(f.kind, m, opts));
    }
  }
  return unique(std::move(keys));
}

std::vector<MatchKey> label_keys(std::span<const sim::LabeledAnomaly> labels, const ScoreOptions& opts) {
  std::set<MatchKey> keys;
  for (const auto& la : labels) {
    for (const auto& l : la.expected) {
      if (wanted(l.kind, opts)) keys.emplace(l.kind, la.stage_id, la.node, metric_part(l.kind, l.metric, opts));
    }
  }
  return unique(std::move(keys));
}

Score score(std::span<const Finding> findings, std::span<const sim::LabeledAnomaly> labels, const ScoreOptions& opts) {
  const auto alarms = alarm_keys(findings, opts);
  const auto truth = label_keys(labels, opts);
  std::size_t hits = 0;
  for (const auto& k : alarms) {
    if (std::binary_search(truth.begin(), truth.end(), k)) ++hits;
  }
  return make_score(hits, alarms.size(), truth.size());
}

nlohmann::ordered_json to_json(const Score& s) {
  nlohmann::ordered_json j;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["accuracy"] = s.accuracy;
  j["successes"] = s.successes;
  j["alarms"] = s.alarms;
  j["outliers"] = s.outliers;
  j["degenerate"] = s.degenerate;
  return j;
}

nlohmann::ordered_json score_report(std::span<const Finding> findings, std::span<const sim::LabeledAnomaly> labels) {
  nlohmann::ordered_json j;
  j["overall"] = to_json(score(findings, labels));
  nlohmann::ordered_json by_kind = nlohmann::ordered_json::object();
  for (auto kind : kAllFindingKinds) by_kind[std::string(to_string(kind))] = to_json(score(findings, labels, {kind, false}));
  j["by_kind"] = std::move(by_kind);
  j["outlier_metric_per_node"] = to_json(score(findings, labels, {FindingKind::OutlierMetric, true}));
  return j;
}

CorpusRun run_corpus(std::span<const sim::ScenarioSpec> specs, const PipelineConfig& cfg) {
  CorpusRun run;
  for (const auto& spec : specs) {
    const auto gen = sim::generate_trace(spec);
    for (auto f : report::diagnose(gen.trace, cfg).all_findings()) {
      f.stage_id = spec.name + "/" + f.stage_id;
      run.findings.push_back(std::move(f));
    }
    for (auto la : gen.labels) {
      la.stage_id = spec.name + "/" + la.stage_id;
      run.labels.push_back(std::move(la));
    }
  }
  return run;
}

}  // namespace stagelens::eval
