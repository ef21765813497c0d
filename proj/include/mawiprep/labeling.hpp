// Copyright 2026 The mawiprep Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mawiprep::labeling {

/// Flows matched by one detector alarm.
struct AlarmTrafficSet {
  std::string alarm_id;
  std::unordered_set<std::string> flows;
};

/// Simpson overlap coefficient |a ∩ b| / min(|a|, |b|).
/// Throws a domain error (InvalidArgument) when either set is empty.
double simpson_index(const AlarmTrafficSet& a, const AlarmTrafficSet& b);

struct SimilarityEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;

  friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

/// One edge per unordered pair (i < j) with a non-zero Simpson index,
/// ordered by (i, j).
std::vector<SimilarityEdge> build_similarity_edges(const std::vector<AlarmTrafficSet>& sets);

/// "i\tj\tweight" lines for inspection.
std::string edges_to_text(const std::vector<SimilarityEdge>& edges);

struct CommunityVerdict {
  bool accepted = false;
  double distance = 0.0;
};

enum class CommunityClass { Anomalous, Suspicious, Notice, Unclassified };

std::string_view to_string(CommunityClass c) noexcept;

struct ClassifyOptions {
  /// Rejected communities with 0 < d <= 0.5 are not covered by the rule
  /// list; when set they are reported as suspicious instead of unclassified.
  bool fold_unclassified_into_suspicious = false;
};

/// accepted -> anomalous; rejected with d <= 0 -> suspicious; rejected with
/// d > 0.5 -> notice; anything else -> unclassified.
CommunityClass classify_community(const CommunityVerdict& verdict, const ClassifyOptions& options = {});

}  // namespace mawiprep::labeling
