#include "anomamind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace anomamind {

std::vector<int> verdicts_to_labels(const std::vector<AnomalyVerdict>& verdicts,
                                    std::size_t total, int min_confidence) {
  if (min_confidence < 1 || min_confidence > 3) {
    raise(ErrorCode::InvalidArgument, "min_confidence must be in 1..3");
  }
  std::vector<int> labels(total, 0);
  for (const auto& v : verdicts) {
    if (v.confidence < min_confidence) continue;
    if (v.start < 0 || v.end >= static_cast<long>(total)) {
      raise(ErrorCode::IntervalOutOfBounds,
            "[" + std::to_string(v.start) + ", " + std::to_string(v.end) + "] with T=" +
                std::to_string(total));
    }
    for (long i = v.start; i <= v.end; ++i) labels[static_cast<std::size_t>(i)] = 1;
  }
  return labels;
}

MetricsReport point_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) {
    raise(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " predictions vs " +
                                         std::to_string(truth.size()) + " truth labels");
  }
  MetricsReport report;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++report.counts.tp;
    else if (p && !t) ++report.counts.fp;
    else if (!p && t) ++report.counts.fn;
  }
  const auto& c = report.counts;
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
    report.precision = report.recall = report.f1 = 1.0;
    return report;
  }
  report.precision = c.tp + c.fp == 0 ? 0.0
                                      : static_cast<double>(c.tp) /
                                            static_cast<double>(c.tp + c.fp);
  report.recall = c.tp + c.fn == 0 ? 0.0
                                   : static_cast<double>(c.tp) /
                                         static_cast<double>(c.tp + c.fn);
  const double pr = report.precision + report.recall;
  report.f1 = pr == 0.0 ? 0.0 : 2.0 * report.precision * report.recall / pr;
  return report;
}

std::pair<double, double> best_f1_confidence(const std::vector<AnomalyVerdict>& verdicts,
                                             const std::vector<int>& truth) {
  if (truth.empty()) raise(ErrorCode::MissingTruth, "confidence sweep needs truth labels");
  double best = -1.0;
  double best_threshold = 1.0;
  for (int threshold = 1; threshold <= 3; ++threshold) {
    const auto pred = verdicts_to_labels(verdicts, truth.size(), threshold);
    const double f1 = point_metrics(pred, truth).f1;
    if (f1 > best) {
      best = f1;
      best_threshold = threshold;
    }
  }
  return {best, best_threshold};
}

std::pair<double, double> best_f1_score(const ScoreSeries& scores,
                                        const std::vector<int>& truth) {
  if (truth.empty()) raise(ErrorCode::MissingTruth, "score sweep needs truth labels");
  if (scores.scores.size() != truth.size()) {
    raise(ErrorCode::LengthMismatch, "scores and truth differ in length");
  }

  std::set<double> thresholds(scores.scores.begin(), scores.scores.end());
  std::vector<double> sweep(thresholds.begin(), thresholds.end());
  sweep.push_back(std::numeric_limits<double>::infinity());

  double best = -1.0;
  double best_threshold = sweep.front();
  std::vector<int> pred(truth.size());
  for (const double threshold : sweep) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = scores.scores[i] >= threshold ? 1 : 0;
    }
    const double f1 = point_metrics(pred, truth).f1;
    if (f1 > best) {
      best = f1;
      best_threshold = threshold;
    }
  }
  return {best, best_threshold};
}

MetricsReport dataset_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) raise(ErrorCode::InvalidArgument, "dataset_report needs >= 1 report");

  ConfusionCounts pooled;
  double best_sum = 0.0;
  std::size_t best_n = 0;
  for (const auto& r : reports) {
    pooled.tp += r.counts.tp;
    pooled.fp += r.counts.fp;
    pooled.fn += r.counts.fn;
    if (r.best_f1) {
      best_sum += *r.best_f1;
      ++best_n;
    }
  }

  std::vector<int> pred;
  std::vector<int> truth;
  // Rebuild the pooled confusion as synthetic label vectors so the metric
  // conventions stay in one place.
  pred.insert(pred.end(), pooled.tp, 1);
  truth.insert(truth.end(), pooled.tp, 1);
  pred.insert(pred.end(), pooled.fp, 1);
  truth.insert(truth.end(), pooled.fp, 0);
  pred.insert(pred.end(), pooled.fn, 0);
  truth.insert(truth.end(), pooled.fn, 1);
  MetricsReport out = pred.empty() ? MetricsReport{1.0, 1.0, 1.0, {}, {}, {}}
                                   : point_metrics(pred, truth);
  out.counts = pooled;
  if (best_n > 0) out.best_f1 = best_sum / static_cast<double>(best_n);
  return out;
}

double average_metric(const MetricsReport& report) {
  double sum = report.precision + report.recall + report.f1;
  double n = 3.0;
  if (report.best_f1) {
    sum += *report.best_f1;
    n += 1.0;
  }
  return sum / n;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j = {{"precision", report.precision},
                      {"recall", report.recall},
                      {"f1", report.f1},
                      {"counts",
                       {{"tp", report.counts.tp},
                        {"fp", report.counts.fp},
                        {"fn", report.counts.fn}}},
                      {"average", average_metric(report)}};
  if (report.best_f1) j["best_f1"] = *report.best_f1;
  if (report.best_threshold) {
    j["best_threshold"] = std::isinf(*report.best_threshold)
                              ? nlohmann::json("inf")
                              : nlohmann::json(*report.best_threshold);
  }
  return j;
}

std::string metrics_csv_header() { return "precision,recall,f1,best_f1,average"; }

std::string metrics_csv_row(const MetricsReport& report) {
  char buf[160];
  if (report.best_f1) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f", report.precision,
                  report.recall, report.f1, *report.best_f1, average_metric(report));
  } else {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,,%.6f", report.precision, report.recall,
                  report.f1, average_metric(report));
  }
  return buf;
}

}  // namespace anomamind
