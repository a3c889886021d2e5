#pragma once

// Abnormal-node detection from pairwise cosine similarity of per-node mean
// metric vectors.

#include <map>
#include <string>
#include <vector>

#include "stagelens/correlate.hpp"

namespace stagelens::node {

struct SimilarityConfig {
  double threshold = 0.5;    // Th_simi, in (0,1)
  bool homogeneous = true;  // cluster assumed homogeneous

  void validate() const;
};

/// Cosine similarity restricted to the dimensions present in both vectors.
/// Throws PreconditionError when no dimension is shared or a restricted
/// vector has zero norm.
double cosine_similarity(const correlate::MetricVector& a, const correlate::MetricVector& b);

struct NodeSimilarity {
  std::string node;
  double average = 0.0;
  bool abnormal = false;
};

struct AbnormalNodeResult {
  bool evaluable = false;
  std::vector<NodeSimilarity> nodes;      // node name order
  std::vector<std::string> skipped;       // nodes whose similarity was undefined
  std::vector<std::string> notes;
};

AbnormalNodeResult detect_abnormal_nodes(const std::map<std::string, correlate::MetricVector>& vectors,
                                         const SimilarityConfig& cfg);

}  // namespace stagelens::node
