#pragma once

// Precision / recall / accuracy of detector findings against simulator labels.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagelens/config.hpp"
#include "stagelens/finding.hpp"
#include "stagelens/simulate.hpp"

namespace stagelens::eval {

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;  // harmonic mean of precision and recall
  std::size_t successes = 0;
  std::size_t alarms = 0;
  std::size_t outliers = 0;
  bool degenerate = false;  // no alarms, precision set by convention

  friend bool operator==(const Score&, const Score&) = default;
};

/// Builds a Score from raw counts. With zero alarms precision is 1 when
/// there are no labels either and 0 otherwise, and the score is degenerate.
Score make_score(std::size_t successes, std::size_t alarms, std::size_t outliers);

struct ScoreOptions {
  std::optional<FindingKind> kind;  // restrict to one finding kind
  bool per_node = false;            // ignore metric names when matching
};

/// Matching key: (kind, stage, node, metric). The metric takes part only for
/// OutlierMetric and only when per_node is false.
using MatchKey = std::tuple<FindingKind, std::string, std::string, std::string>;

std::vector<MatchKey> alarm_keys(std::span<const Finding> findings, const ScoreOptions& opts);
std::vector<MatchKey> label_keys(std::span<const sim::LabeledAnomaly> labels, const ScoreOptions& opts);

/// Duplicate findings collapse before counting.
Score score(std::span<const Finding> findings, std::span<const sim::LabeledAnomaly> labels,
            const ScoreOptions& opts = {});

/// Overall, per-kind and per-node outlier-metric scores as a JSON document.
nlohmann::ordered_json score_report(std::span<const Finding> findings, std::span<const sim::LabeledAnomaly> labels);

nlohmann::ordered_json to_json(const Score& s);

struct CorpusRun {
  std::vector<Finding> findings;
  std::vector<sim::LabeledAnomaly> labels;
};

/// Generates and diagnoses every scenario. Stage ids of findings and labels
/// are qualified as "<scenario>/<stage>" so scenarios never collide.
CorpusRun run_corpus(std::span<const sim::ScenarioSpec> specs, const PipelineConfig& cfg);

}  // namespace stagelens::eval
