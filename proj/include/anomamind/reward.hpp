#pragma once

#include <vector>

#include <json.hpp>

#include "anomamind/protocol.hpp"
#include "anomamind/tools.hpp"
#include "anomamind/workflow.hpp"

namespace anomamind {

struct RewardConfig {
  double w_two_sided = 1.0;
  double w_rule_matching = 0.5;
  double w_fp_penalty = 1.0;
  bool enable_two_sided = true;
  bool enable_rule_matching = true;
  bool enable_fp_penalty = true;
};

struct RewardBreakdown {
  double two_sided = 0.0;      // in [0, 1]
  double fp_penalty = 0.0;     // in [0, 1]
  double rule_matching = 0.0;  // in [0, 1]
  double total = 0.0;          // w_ts*ts + w_rm*rm - w_fp*fp over enabled parts
};

/// Mean of point-level precision and recall of the verdict union, with the
/// metrics module's zero-division conventions. Verdict indices must match
/// the truth vector's index space.
double two_sided_reward(const std::vector<AnomalyVerdict>& verdicts,
                        const std::vector<int>& truth);

/// Fraction of points predicted anomalous that lie outside every true
/// interval.
double false_positive_penalty(const std::vector<AnomalyVerdict>& verdicts,
                              const std::vector<int>& truth, std::size_t total);

/// Fraction of verdicts that are structurally valid: type in the taxonomy,
/// non-empty explanation, interval inside the trace window, confidence in
/// 1..3, and overlap with at least one tool-evidence point from the trace.
/// An empty verdict list is vacuously valid (1.0).
double rule_matching_reward(const std::vector<AnomalyVerdict>& verdicts,
                            const KnowledgeStore& taxonomy, const EpisodeTrace& trace);

/// Scores the trace's final verdicts against window-aligned truth labels
/// (length window.end - window.start).
RewardBreakdown score_episode(const EpisodeTrace& trace, const std::vector<int>& truth,
                              const RewardConfig& config = {});

nlohmann::json reward_to_json(const RewardBreakdown& breakdown, const RewardConfig& config);

}  // namespace anomamind
