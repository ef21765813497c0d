// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#include "mawiprep/labeling.hpp"

#include <algorithm>
#include <charconv>

#include "mawiprep/error.hpp"

namespace mawiprep::labeling {

double simpson_index(const AlarmTrafficSet& a, const AlarmTrafficSet& b) {
  if (a.flows.empty() || b.flows.empty()) {
    throw Error(ErrorCategory::InvalidArgument,
                "simpson index undefined for empty traffic set ('" + (a.flows.empty() ? a.alarm_id : b.alarm_id) + "')");
  }
  const auto& small = a.flows.size() <= b.flows.size() ? a.flows : b.flows;
  const auto& large = a.flows.size() <= b.flows.size() ? b.flows : a.flows;
  std::size_t shared = 0;
  for (const auto& f : small) shared += large.count(f);
  return static_cast<double>(shared) / static_cast<double>(small.size());
}

std::vector<SimilarityEdge> build_similarity_edges(const std::vector<AlarmTrafficSet>& sets) {
  std::vector<SimilarityEdge> edges;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const double w = simpson_index(sets[i], sets[j]);
      if (w > 0.0) edges.push_back({i, j, w});
    }
  }
  return edges;
}

std::string edges_to_text(const std::vector<SimilarityEdge>& edges) {
  std::string out;
  char buf[64];
  for (const auto& e : edges) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e.weight);
    out += std::to_string(e.a) + '\t' + std::to_string(e.b) + '\t' + std::string(buf, ptr) + '\n';
  }
  return out;
}

std::string_view to_string(CommunityClass c) noexcept {
  switch (c) {
    case CommunityClass::Anomalous: return "anomalous";
    case CommunityClass::Suspicious: return "suspicious";
    case CommunityClass::Notice: return "notice";
    case CommunityClass::Unclassified: return "unclassified";
  }
  return "unclassified";
}

CommunityClass classify_community(const CommunityVerdict& verdict, const ClassifyOptions& options) {
  if (verdict.accepted) return CommunityClass::Anomalous;
  if (verdict.distance <= 0.0) return CommunityClass::Suspicious;
  if (verdict.distance > 0.5) return CommunityClass::Notice;
  // NaN distances also land here: no rule covers them.
  return options.fold_unclassified_into_suspicious ? CommunityClass::Suspicious : CommunityClass::Unclassified;
}

}  // namespace mawiprep::labeling
