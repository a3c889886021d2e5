#include "stagelens/node_detect.hpp"

#include <algorithm>
#include <cmath>

#include "stagelens/error.hpp"

namespace stagelens::node {

void SimilarityConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("th_simi must lie in (0,1)");
}

double cosine_similarity(const correlate::MetricVector& a, const correlate::MetricVector& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double dot = 0.0, na = 0.0, nb = 0.0;
  std::size_t shared = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!a[i] || !b[i]) continue;
    ++shared;
    dot += *a[i] * *b[i];
    na += *a[i] * *a[i];
    nb += *b[i] * *b[i];
  }
  if (shared == 0) throw PreconditionError("cosine similarity: vectors share no dimension");
  if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine similarity: zero-norm vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

namespace {

bool has_norm(const correlate::MetricVector& v) {
  for (const auto& x : v) {
    if (x && *x != 0.0) return true;
  }
  return false;
}

}  // namespace

AbnormalNodeResult detect_abnormal_nodes(const std::map<std::string, correlate::MetricVector>& vectors,
                                         const SimilarityConfig& cfg) {
  AbnormalNodeResult out;
  std::vector<std::pair<std::string, const correlate::MetricVector*>> usable;
  for (const auto& [node, v] : vectors) {
    if (has_norm(v)) {
      usable.emplace_back(node, &v);
    } else {
      out.skipped.push_back(node);
    }
  }
  if (usable.size() < 2) return out;
  out.evaluable = true;
  if (!cfg.homogeneous)
    out.notes.push_back("cluster declared heterogeneous; similarity assumes comparable hardware");

  const std::size_t p = usable.size();
  std::vector<std::vector<std::optional<double>>> sim(p, std::vector<std::optional<double>>(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      try {
        const double c = cosine_similarity(*usable[i].second, *usable[j].second);
        sim[i][j] = c;
        sim[j][i] = c;
      } catch (const PreconditionError&) {
        out.notes.push_back("similarity undefined between " + usable[i].first + " and " + usable[j].first);
      }
    }
  }

  for (std::size_t i = 0; i < p; ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j != i && sim[i][j]) {
        sum += *sim[i][j];
        ++n;
      }
    }
    if (n == 0) {
      out.skipped.push_back(usable[i].first);
      continue;
    }
    const double avg = sum / static_cast<double>(n);
    out.nodes.push_back({usable[i].first, avg, avg < cfg.threshold});
  }
  return out;
}

}  // namespace stagelens::node
