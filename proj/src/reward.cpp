#include "anomamind/reward.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "anomamind/eval.hpp"

namespace anomamind {

double two_sided_reward(const std::vector<AnomalyVerdict>& verdicts,
                        const std::vector<int>& truth) {
  if (truth.empty()) raise(ErrorCode::MissingTruth, "two_sided_reward needs truth labels");
  const auto pred = verdicts_to_labels(verdicts, truth.size(), 1);
  const auto metrics = point_metrics(pred, truth);
  return 0.5 * (metrics.precision + metrics.recall);
}

double false_positive_penalty(const std::vector<AnomalyVerdict>& verdicts,
                              const std::vector<int>& truth, std::size_t total) {
  if (total < 1) raise(ErrorCode::InvalidArgument, "false_positive_penalty needs T >= 1");
  const auto pred = verdicts_to_labels(verdicts, total, 1);
  std::size_t false_positives = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const bool truly_anomalous = i < truth.size() && truth[i] != 0;
    if (pred[i] != 0 && !truly_anomalous) ++false_positives;
  }
  return static_cast<double>(false_positives) / static_cast<double>(total);
}

namespace {

/// Gathers the window-relative evidence points recorded in the trace:
/// z-score outlier diffs (covering points i and i+1), detected level
/// shifts, and intervals whose context deviation reached 3.
std::set<long> evidence_points(const EpisodeTrace& trace) {
  std::set<long> points;
  for (const auto& event : trace.events) {
    if (event.kind != "tool" || !event.parsed.is_object() || event.parsed.contains("error")) {
      continue;
    }
    ToolResult result;
    try {
      result = event.parsed.get<ToolResult>();
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (const auto* z = std::get_if<ZScoreReport>(&result.payload)) {
      for (const auto idx : z->outlier_indices) {
        points.insert(static_cast<long>(idx));
        points.insert(static_cast<long>(idx) + 1);
      }
    } else if (const auto* s = std::get_if<StructureReport>(&result.payload)) {
      if (s->level_shift_index) points.insert(static_cast<long>(*s->level_shift_index));
      if (s->context_deviation && *s->context_deviation >= 3.0) {
        long lo = 0;
        long hi = 0;
        if (event.params.is_object() && event.params.contains("start") &&
            event.params.contains("end")) {
          lo = event.params["start"].get<long>();
          hi = event.params["end"].get<long>() - 1;
          for (long p = lo; p <= hi; ++p) points.insert(p);
        }
      }
    }
  }
  return points;
}

}  // namespace

double rule_matching_reward(const std::vector<AnomalyVerdict>& verdicts,
                            const KnowledgeStore& taxonomy, const EpisodeTrace& trace) {
  if (verdicts.empty()) return 1.0;

  const auto evidence = evidence_points(trace);
  const auto window_lo = static_cast<long>(trace.window.start);
  const auto window_hi = static_cast<long>(trace.window.end) - 1;

  std::size_t valid = 0;
  for (const auto& v : verdicts) {
    if (!taxonomy.has_anomaly_type(v.type)) continue;
    if (v.explanation.empty()) continue;
    if (v.start < window_lo || v.end > window_hi || v.start > v.end) continue;
    if (v.confidence < 1 || v.confidence > 3) continue;
    bool overlaps = false;
    for (long p = v.start; p <= v.end && !overlaps; ++p) {
      overlaps = evidence.count(p - window_lo) > 0;
    }
    if (!overlaps) continue;
    ++valid;
  }
  return static_cast<double>(valid) / static_cast<double>(verdicts.size());
}

RewardBreakdown score_episode(const EpisodeTrace& trace, const std::vector<int>& truth,
                              const RewardConfig& config) {
  const std::size_t span = trace.window.end - trace.window.start;
  if (truth.size() != span) {
    raise(ErrorCode::WindowTruthMismatch,
          std::to_string(truth.size()) + " truth labels for a window of " +
              std::to_string(span));
  }

  // Final verdicts are absolute; shift into the window's index space.
  std::vector<AnomalyVerdict> local = trace.final_verdicts;
  for (auto& v : local) {
    v.start -= static_cast<long>(trace.window.start);
    v.end -= static_cast<long>(trace.window.start);
  }

  RewardBreakdown breakdown;
  if (config.enable_two_sided) breakdown.two_sided = two_sided_reward(local, truth);
  if (config.enable_fp_penalty) {
    breakdown.fp_penalty = false_positive_penalty(local, truth, span);
  }
  if (config.enable_rule_matching) {
    // The taxonomy travels with the trace snapshot when present.
    KnowledgeStore taxonomy =
        trace.config_snapshot.is_object() && trace.config_snapshot.contains("knowledge")
            ? KnowledgeStore::from_json(trace.config_snapshot["knowledge"])
            : KnowledgeStore::builtin();
    breakdown.rule_matching = rule_matching_reward(trace.final_verdicts, taxonomy, trace);
  }
  breakdown.total = config.w_two_sided * breakdown.two_sided +
                    config.w_rule_matching * breakdown.rule_matching -
                    config.w_fp_penalty * breakdown.fp_penalty;
  return breakdown;
}

nlohmann::json reward_to_json(const RewardBreakdown& breakdown, const RewardConfig& config) {
  return {{"two_sided", breakdown.two_sided},
          {"fp_penalty", breakdown.fp_penalty},
          {"rule_matching", breakdown.rule_matching},
          {"total", breakdown.total},
          {"weights",
           {{"two_sided", config.w_two_sided},
            {"rule_matching", config.w_rule_matching},
            {"fp_penalty", config.w_fp_penalty}}},
          {"enabled",
           {{"two_sided", config.enable_two_sided},
            {"rule_matching", config.enable_rule_matching},
            {"fp_penalty", config.enable_fp_penalty}}}};
}

}  // namespace anomamind
