#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anomamind/baselines.hpp"
#include "anomamind/protocol.hpp"

namespace anomamind {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> best_f1;
  std::optional<double> best_threshold;
  ConfusionCounts counts;
};

/// Per-point labels from the union of closed verdict intervals with
/// confidence >= min_confidence. Intervals must lie inside [0, T).
std::vector<int> verdicts_to_labels(const std::vector<AnomalyVerdict>& verdicts,
                                    std::size_t total, int min_confidence = 1);

/// Point-wise precision/recall/F1 with the degenerate conventions: TP=0 with
/// any FP or FN gives 0 for the undefined ratios; an all-negative exact
/// match gives P=R=F1=1.
MetricsReport point_metrics(const std::vector<int>& pred, const std::vector<int>& truth);

/// Sweeps confidence thresholds {1,2,3}; returns the max F1 and the smallest
/// threshold attaining it.
std::pair<double, double> best_f1_confidence(const std::vector<AnomalyVerdict>& verdicts,
                                             const std::vector<int>& truth);

/// Sweeps every distinct score value plus +infinity, labeling score >=
/// threshold; returns the max F1 and the smallest threshold attaining it.
std::pair<double, double> best_f1_score(const ScoreSeries& scores,
                                        const std::vector<int>& truth);

/// Micro-average: pools confusion counts; best_f1 is the mean of the
/// per-series best_f1 values that are present.
MetricsReport dataset_report(const std::vector<MetricsReport>& reports);

/// Mean of precision, recall, F1 and (when present) best F1.
double average_metric(const MetricsReport& report);

nlohmann::json metrics_to_json(const MetricsReport& report);

/// Table row in the order Precision, Recall, F1, Best-F1, Average.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);

}  // namespace anomamind
