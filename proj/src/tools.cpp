#include "anomamind/tools.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "anomamind/baselines.hpp"
#include "anomamind/embedded_assets.hpp"

namespace anomamind {

namespace {

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double population_std(const std::vector<double>& values, double mean) {
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Quantile with linear interpolation between closest ranks.
double quantile(std::vector<double> sorted, double p) {
  const double h = p * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> first_differences(const std::vector<double>& values) {
  std::vector<double> diffs(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) diffs[i] = values[i + 1] - values[i];
  return diffs;
}

}  // namespace

const char* to_string(Scope scope) {
  return scope == Scope::local ? "local" : "global";
}

Scope scope_from_string(const std::string& name) {
  if (name == "local") return Scope::local;
  if (name == "global") return Scope::global;
  raise(ErrorCode::ParamValidation, "scope must be 'local' or 'global', got '" + name + "'");
}

const char* to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::anomaly_type: return "anomaly_type";
    case RecordKind::domain: return "domain";
    case RecordKind::tool_semantics: return "tool_semantics";
  }
  return "domain";
}

RecordKind record_kind_from_string(const std::string& name) {
  if (name == "anomaly_type") return RecordKind::anomaly_type;
  if (name == "domain") return RecordKind::domain;
  if (name == "tool_semantics") return RecordKind::tool_semantics;
  raise(ErrorCode::InvalidArgument, "unknown record kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// stat_features
// ---------------------------------------------------------------------------

ToolResult stat_features(const Window& window) {
  const auto& v = window.values;
  if (v.size() < 2) raise(ErrorCode::WindowTooShort, "stat_features needs n >= 2");

  StatSummary s;
  s.n = v.size();
  s.mean = mean_of(v);
  s.std_dev = population_std(v, s.mean);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = quantile(sorted, 0.5);
  s.iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);

  ToolResult result;
  result.tool = "stat_features";
  result.summary = "stat_features: n=" + std::to_string(s.n) + " mean=" + fmt_num(s.mean) +
                   " std=" + fmt_num(s.std_dev) + " min=" + fmt_num(s.min) +
                   " max=" + fmt_num(s.max) + " median=" + fmt_num(s.median) +
                   " iqr=" + fmt_num(s.iqr);
  result.payload = s;
  return result;
}

// ---------------------------------------------------------------------------
// diff_zscore
// ---------------------------------------------------------------------------

ToolResult diff_zscore(const Window& window, Scope scope, int radius, double threshold) {
  const auto& v = window.values;
  if (v.size() < 3) raise(ErrorCode::WindowTooShort, "diff_zscore needs n >= 3");
  if (scope == Scope::local && radius < 2) {
    raise(ErrorCode::ParamValidation, "local scope needs radius >= 2");
  }

  const auto diffs = first_differences(v);
  const auto d = static_cast<std::ptrdiff_t>(diffs.size());

  ZScoreReport report;
  report.scope = scope;
  report.threshold = threshold;
  report.scores.resize(diffs.size());

  if (scope == Scope::global) {
    const double mu = mean_of(diffs);
    const double sigma = population_std(diffs, mu);
    if (sigma == 0.0) report.degenerate = true;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      report.scores[i] = {i, sigma == 0.0 ? 0.0 : (diffs[i] - mu) / sigma};
    }
  } else {
    for (std::ptrdiff_t i = 0; i < d; ++i) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - radius);
      const std::ptrdiff_t hi = std::min(d - 1, i + radius);
      double sum = 0.0;
      std::ptrdiff_t count = 0;
      for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        sum += diffs[static_cast<std::size_t>(j)];
        ++count;
      }
      const double mu = sum / static_cast<double>(count);
      double var = 0.0;
      for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const double dv = diffs[static_cast<std::size_t>(j)] - mu;
        var += dv * dv;
      }
      const double sigma = std::sqrt(var / static_cast<double>(count));
      if (sigma == 0.0) report.degenerate = true;
      report.scores[static_cast<std::size_t>(i)] = {
          static_cast<std::size_t>(i),
          sigma == 0.0 ? 0.0 : (diffs[static_cast<std::size_t>(i)] - mu) / sigma};
    }
  }

  for (const auto& p : report.scores) {
    if (std::fabs(p.z) >= threshold) report.outlier_indices.push_back(p.index);
  }

  ToolResult result;
  result.tool = "diff_zscore";
  std::ostringstream summary;
  summary << "diff_zscore[" << to_string(scope) << "]: " << report.outlier_indices.size()
          << " outlier diff(s) at [";
  for (std::size_t i = 0; i < report.outlier_indices.size(); ++i) {
    if (i) summary << ", ";
    summary << report.outlier_indices[i];
  }
  summary << "] threshold=" << fmt_num(threshold);
  if (report.degenerate) summary << " degenerate=true";
  result.summary = summary.str();
  result.payload = std::move(report);
  return result;
}

// ---------------------------------------------------------------------------
// global_structure
// ---------------------------------------------------------------------------

namespace {

std::optional<std::size_t> dominant_period_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  const double mu = mean_of(v);
  double denom = 0.0;
  for (double x : v) denom += (x - mu) * (x - mu);
  if (denom == 0.0) return std::nullopt;

  std::size_t best_lag = 0;
  double best_corr = 0.0;
  for (std::size_t lag = 2; lag <= n / 2; ++lag) {
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (v[i] - mu) * (v[(i + lag) % n] - mu);
    }
    const double corr = num / denom;
    if (corr > best_corr) {
      best_corr = corr;
      best_lag = lag;
    }
  }
  if (best_corr >= 0.5) return best_lag;
  return std::nullopt;
}

std::optional<std::size_t> level_shift_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  constexpr std::size_t kMinSegment = 2;
  std::size_t best_split = 0;
  double best_gap = -1.0;
  double best_pooled = 0.0;

  // Prefix sums keep the split scan O(n).
  std::vector<double> sum(n + 1, 0.0), sum2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[i + 1] = sum[i] + v[i];
    sum2[i + 1] = sum2[i] + v[i] * v[i];
  }
  for (std::size_t s = kMinSegment; s + kMinSegment <= n; ++s) {
    const double n1 = static_cast<double>(s);
    const double n2 = static_cast<double>(n - s);
    const double m1 = sum[s] / n1;
    const double m2 = (sum[n] - sum[s]) / n2;
    const double var1 = std::max(0.0, sum2[s] / n1 - m1 * m1);
    const double var2 = std::max(0.0, (sum2[n] - sum2[s]) / n2 - m2 * m2);
    const double gap = std::fabs(m1 - m2);
    if (gap > best_gap) {
      best_gap = gap;
      best_split = s;
      best_pooled = std::sqrt((n1 * var1 + n2 * var2) / static_cast<double>(n));
    }
  }
  if (best_gap > 1e-12 && best_gap >= 3.0 * best_pooled) return best_split;
  return std::nullopt;
}

}  // namespace

ToolResult global_structure(const Window& window) {
  const auto& v = window.values;
  if (v.size() < 8) raise(ErrorCode::WindowTooShort, "global_structure needs n >= 8");

  StructureReport report;
  report.scope = Scope::global;
  report.trend_slope = least_squares_line(v).first;
  report.dominant_period = dominant_period_of(v);
  report.level_shift_index = level_shift_of(v);

  ToolResult result;
  result.tool = "global_structure";
  std::ostringstream summary;
  summary << "global_structure: slope=" << fmt_num(report.trend_slope);
  if (report.dominant_period) summary << " period=" << *report.dominant_period;
  if (report.level_shift_index) summary << " level_shift_at=" << *report.level_shift_index;
  if (!report.dominant_period && !report.level_shift_index) summary << " no-period no-shift";
  result.summary = summary.str();
  result.payload = report;
  return result;
}

// ---------------------------------------------------------------------------
// local_structure
// ---------------------------------------------------------------------------

ToolResult local_structure(const Window& window, std::size_t start, std::size_t end) {
  const auto& v = window.values;
  if (start >= end || end > v.size()) {
    raise(ErrorCode::IntervalOutOfBounds,
          "interval [" + std::to_string(start) + ", " + std::to_string(end) + ") in window of " +
              std::to_string(v.size()));
  }
  const std::size_t len = end - start;
  const std::size_t ctx_lo = start >= len ? start - len : 0;
  const std::size_t ctx_hi = std::min(v.size(), end + len);

  std::vector<double> context;
  context.reserve((start - ctx_lo) + (ctx_hi - end));
  for (std::size_t i = ctx_lo; i < start; ++i) context.push_back(v[i]);
  for (std::size_t i = end; i < ctx_hi; ++i) context.push_back(v[i]);
  if (context.empty()) {
    raise(ErrorCode::IntervalOutOfBounds, "interval leaves no flanking context");
  }

  const double ctx_mean = mean_of(context);
  const double ctx_std = population_std(context, ctx_mean);

  double deviation = 0.0;
  for (std::size_t i = start; i < end; ++i) deviation += std::fabs(v[i] - ctx_mean);
  deviation /= static_cast<double>(len);

  StructureReport report;
  report.scope = Scope::local;
  std::vector<double> interval(v.begin() + static_cast<std::ptrdiff_t>(start),
                               v.begin() + static_cast<std::ptrdiff_t>(end));
  report.trend_slope = least_squares_line(interval).first;
  report.context_deviation =
      ctx_std == 0.0 ? std::numeric_limits<double>::infinity() : deviation / ctx_std;

  ToolResult result;
  result.tool = "local_structure";
  result.summary = "local_structure[" + std::to_string(start) + ", " + std::to_string(end) +
                   "): context_deviation=" + fmt_num(*report.context_deviation) +
                   " slope=" + fmt_num(report.trend_slope);
  result.payload = report;
  return result;
}

// ---------------------------------------------------------------------------
// localization
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMergeGap = 5;
constexpr std::size_t kWidenMargin = 3;

std::vector<CandidateInterval> saliency_to_candidates(const std::vector<double>& saliency,
                                                      std::size_t max_candidates) {
  const std::size_t n = saliency.size();
  const double mu = mean_of(saliency);
  const double sigma = population_std(saliency, mu);
  if (sigma == 0.0) return {};
  const double threshold = mu + 2.0 * sigma;

  // Runs of indices above threshold.
  std::vector<CandidateInterval> runs;
  std::size_t i = 0;
  while (i < n) {
    if (saliency[i] > threshold) {
      std::size_t j = i;
      while (j < n && saliency[j] > threshold) ++j;
      runs.push_back({i, j, 0.0});
      i = j;
    } else {
      ++i;
    }
  }
  if (runs.empty()) return {};

  // Merge runs closer than the gap, then widen by the margin.
  std::vector<CandidateInterval> merged;
  for (const auto& run : runs) {
    if (!merged.empty() && run.start - merged.back().end < kMergeGap) {
      merged.back().end = run.end;
    } else {
      merged.push_back(run);
    }
  }
  for (auto& c : merged) {
    c.start = c.start >= kWidenMargin ? c.start - kWidenMargin : 0;
    c.end = std::min(n, c.end + kWidenMargin);
  }
  // Widening may butt neighbors together; merge overlaps again.
  std::vector<CandidateInterval> disjoint;
  for (const auto& c : merged) {
    if (!disjoint.empty() && c.start <= disjoint.back().end) {
      disjoint.back().end = std::max(disjoint.back().end, c.end);
    } else {
      disjoint.push_back(c);
    }
  }
  for (auto& c : disjoint) {
    double peak = 0.0;
    for (std::size_t k = c.start; k < c.end; ++k) peak = std::max(peak, saliency[k]);
    c.saliency = peak;
  }

  std::sort(disjoint.begin(), disjoint.end(),
            [](const CandidateInterval& a, const CandidateInterval& b) {
              return a.saliency > b.saliency;
            });
  if (disjoint.size() > max_candidates) disjoint.resize(max_candidates);
  std::sort(disjoint.begin(), disjoint.end(),
            [](const CandidateInterval& a, const CandidateInterval& b) {
              return a.start < b.start;
            });
  return disjoint;
}

}  // namespace

std::vector<CandidateInterval> localize_candidates(const Window& window,
                                                   std::size_t max_candidates) {
  if (window.size() < 8) return {};
  return saliency_to_candidates(spectral_residual_saliency(window.values), max_candidates);
}

std::vector<CandidateInterval> parse_interval_reply(const std::string& reply,
                                                    std::size_t window_size,
                                                    std::size_t max_candidates) {
  const auto open = reply.find('[');
  if (open == std::string::npos) {
    raise(ErrorCode::BackendReplyUnparseable, "no JSON array in perception reply");
  }
  nlohmann::json parsed = nlohmann::json::parse(reply.substr(open), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) {
    raise(ErrorCode::BackendReplyUnparseable, "perception reply is not a JSON array");
  }

  std::vector<CandidateInterval> out;
  for (const auto& item : parsed) {
    long start = -1;
    long end = -1;
    if (item.is_array() && item.size() == 2 && item[0].is_number() && item[1].is_number()) {
      start = item[0].get<long>();
      end = item[1].get<long>();
    } else if (item.is_object() && item.contains("start") && item.contains("end")) {
      start = item["start"].get<long>();
      end = item["end"].get<long>();
    } else {
      raise(ErrorCode::BackendReplyUnparseable, "interval entry has no start/end");
    }
    start = std::max(0L, start);
    end = std::min(static_cast<long>(window_size), end);
    if (start >= end) continue;
    out.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end), 1.0});
  }

  std::sort(out.begin(), out.end(), [](const CandidateInterval& a, const CandidateInterval& b) {
    return a.start < b.start;
  });
  std::vector<CandidateInterval> disjoint;
  for (const auto& c : out) {
    if (!disjoint.empty() && c.start <= disjoint.back().end) {
      disjoint.back().end = std::max(disjoint.back().end, c.end);
    } else {
      disjoint.push_back(c);
    }
  }
  if (disjoint.size() > max_candidates) disjoint.resize(max_candidates);
  return disjoint;
}

LocalizationOutcome localize_candidates(
    const Window& window,
    const std::function<std::string(const std::string&)>& perception,
    std::size_t max_candidates) {
  LocalizationOutcome outcome;
  if (!perception) {
    outcome.candidates = localize_candidates(window, max_candidates);
    return outcome;
  }
  outcome.used_backend = true;

  std::ostringstream request;
  request << "Inspect the plotted window of " << window.size()
          << " normalized values and list the suspicious intervals as a JSON array of "
             "[start, end) index pairs, at most "
          << max_candidates << ". Values: ";
  nlohmann::json values = nlohmann::json::array();
  for (double v : window.values) values.push_back(v);
  request << values.dump();

  try {
    const std::string reply = perception(request.str());
    outcome.candidates = parse_interval_reply(reply, window.size(), max_candidates);
  } catch (const Error& e) {
    outcome.fell_back = true;
    outcome.note = e.what();
    outcome.candidates = localize_candidates(window, max_candidates);
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Knowledge store
// ---------------------------------------------------------------------------

KnowledgeStore::KnowledgeStore(std::vector<KnowledgeRecord> records)
    : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const KnowledgeRecord& a, const KnowledgeRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].id == records_[i - 1].id) {
      raise(ErrorCode::InvalidArgument, "duplicate knowledge record id '" + records_[i].id + "'");
    }
  }
}

bool KnowledgeStore::has_anomaly_type(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.kind == RecordKind::anomaly_type && r.id == name) return true;
  }
  return false;
}

KnowledgeStore KnowledgeStore::from_json(const nlohmann::json& j) {
  if (!j.is_array()) raise(ErrorCode::ParseError, "knowledge store must be a JSON array");
  std::vector<KnowledgeRecord> records;
  for (const auto& item : j) records.push_back(item.get<KnowledgeRecord>());
  return KnowledgeStore(std::move(records));
}

KnowledgeStore KnowledgeStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::FileMissing, path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "invalid JSON in " + path);
  return from_json(j);
}

KnowledgeStore KnowledgeStore::builtin() {
  return from_json(nlohmann::json::parse(embedded::kKnowledgeJson));
}

nlohmann::json KnowledgeStore::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records_) j.push_back(r);
  return j;
}

// ---------------------------------------------------------------------------
// query_knowledge
// ---------------------------------------------------------------------------

ToolResult query_knowledge(const KnowledgeStore& store,
                           const std::vector<std::string>& tags,
                           std::optional<RecordKind> kind) {
  std::vector<KnowledgeRecord> matches;
  for (const auto& record : store.records()) {
    if (kind && record.kind != *kind) continue;
    bool all = true;
    for (const auto& tag : tags) {
      if (std::find(record.tags.begin(), record.tags.end(), tag) == record.tags.end()) {
        all = false;
        break;
      }
    }
    if (all) matches.push_back(record);
  }

  ToolResult result;
  result.tool = "query_knowledge";
  std::ostringstream summary;
  summary << "query_knowledge: " << matches.size() << " record(s)";
  for (const auto& m : matches) summary << "\n- [" << m.id << "] " << m.body;
  result.summary = summary.str();
  result.payload = std::move(matches);
  return result;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace {

void check_params(const ToolCall& call, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : call.params) {
    if (!allowed.count(key)) {
      raise(ErrorCode::ParamValidation, call.tool + ": unknown param '" + key + "'");
    }
    (void)value;
  }
}

double number_param(const ToolCall& call, const std::string& key, double fallback) {
  auto it = call.params.find(key);
  if (it == call.params.end()) return fallback;
  if (!it->second.is_number()) {
    raise(ErrorCode::ParamValidation, call.tool + ": param '" + key + "' must be a number");
  }
  return it->second.get<double>();
}

long integer_param(const ToolCall& call, const std::string& key) {
  auto it = call.params.find(key);
  if (it == call.params.end()) {
    raise(ErrorCode::ParamValidation, call.tool + ": missing param '" + key + "'");
  }
  if (!it->second.is_number_integer()) {
    raise(ErrorCode::ParamValidation, call.tool + ": param '" + key + "' must be an integer");
  }
  return it->second.get<long>();
}

std::string text_param(const ToolCall& call, const std::string& key, const std::string& fallback) {
  auto it = call.params.find(key);
  if (it == call.params.end()) return fallback;
  if (!it->second.is_string()) {
    raise(ErrorCode::ParamValidation, call.tool + ": param '" + key + "' must be text");
  }
  return it->second.get<std::string>();
}

}  // namespace

const std::vector<std::string>& registered_tools() {
  static const std::vector<std::string> names = {
      "stat_features", "diff_zscore", "global_structure", "local_structure",
      "query_knowledge"};
  return names;
}

std::string tool_catalog_text() {
  return "- stat_features(): mean/std/min/max/median/iqr of the window\n"
         "- diff_zscore(scope=global|local, radius=10, threshold=3.0): standardized "
         "first differences; outliers are |z| >= threshold\n"
         "- global_structure(): trend slope, dominant period, level-shift point\n"
         "- local_structure(start, end): deviation of an interval against its "
         "flanking context, in context-std units\n"
         "- query_knowledge(tags=\"a,b\", kind=...): matching knowledge records";
}

ToolResult dispatch(const ToolCall& call, const ToolContext& context) {
  if (!context.window) raise(ErrorCode::InvalidArgument, "dispatch needs a window");

  if (call.tool == "stat_features") {
    check_params(call, {});
    return stat_features(*context.window);
  }
  if (call.tool == "diff_zscore") {
    check_params(call, {"scope", "radius", "threshold"});
    const Scope scope = scope_from_string(text_param(call, "scope", "global"));
    const double radius = number_param(call, "radius", 10);
    const double threshold = number_param(call, "threshold", 3.0);
    return diff_zscore(*context.window, scope, static_cast<int>(radius), threshold);
  }
  if (call.tool == "global_structure") {
    check_params(call, {});
    return global_structure(*context.window);
  }
  if (call.tool == "local_structure") {
    check_params(call, {"start", "end"});
    const long start = integer_param(call, "start");
    const long end = integer_param(call, "end");
    if (start < 0 || end < 0) {
      raise(ErrorCode::IntervalOutOfBounds, "negative interval bound");
    }
    return local_structure(*context.window, static_cast<std::size_t>(start),
                           static_cast<std::size_t>(end));
  }
  if (call.tool == "query_knowledge") {
    check_params(call, {"tags", "kind"});
    if (!context.knowledge) raise(ErrorCode::InvalidArgument, "dispatch needs a knowledge store");
    std::vector<std::string> tags;
    const std::string joined = text_param(call, "tags", "");
    std::string current;
    for (char c : joined) {
      if (c == ',') {
        if (!current.empty()) tags.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    if (!current.empty()) tags.push_back(current);
    std::optional<RecordKind> kind;
    const std::string kind_text = text_param(call, "kind", "");
    if (!kind_text.empty()) kind = record_kind_from_string(kind_text);
    return query_knowledge(*context.knowledge, tags, kind);
  }
  raise(ErrorCode::UnknownTool, call.tool);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json encode_extended(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double decode_extended(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    raise(ErrorCode::ParseError, "bad extended number '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const StatSummary& s) {
  j = {{"mean", s.mean},     {"std", s.std_dev}, {"min", s.min}, {"max", s.max},
       {"median", s.median}, {"iqr", s.iqr},     {"n", s.n}};
}

void from_json(const nlohmann::json& j, StatSummary& s) {
  s.mean = j.at("mean").get<double>();
  s.std_dev = j.at("std").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.median = j.at("median").get<double>();
  s.iqr = j.at("iqr").get<double>();
  s.n = j.at("n").get<std::size_t>();
}

void to_json(nlohmann::json& j, const ZScoreReport& r) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& p : r.scores) scores.push_back({{"index", p.index}, {"z", p.z}});
  j = {{"scope", to_string(r.scope)},
       {"scores", std::move(scores)},
       {"outlier_indices", r.outlier_indices},
       {"threshold", r.threshold},
       {"degenerate", r.degenerate}};
}

void from_json(const nlohmann::json& j, ZScoreReport& r) {
  r.scope = scope_from_string(j.at("scope").get<std::string>());
  r.scores.clear();
  for (const auto& p : j.at("scores")) {
    r.scores.push_back({p.at("index").get<std::size_t>(), p.at("z").get<double>()});
  }
  r.outlier_indices = j.at("outlier_indices").get<std::vector<std::size_t>>();
  r.threshold = j.at("threshold").get<double>();
  r.degenerate = j.at("degenerate").get<bool>();
}

void to_json(nlohmann::json& j, const StructureReport& r) {
  j = {{"scope", to_string(r.scope)}, {"trend_slope", r.trend_slope}};
  if (r.dominant_period) j["dominant_period"] = *r.dominant_period;
  if (r.level_shift_index) j["level_shift_index"] = *r.level_shift_index;
  if (r.context_deviation) j["context_deviation"] = encode_extended(*r.context_deviation);
}

void from_json(const nlohmann::json& j, StructureReport& r) {
  r.scope = scope_from_string(j.at("scope").get<std::string>());
  r.trend_slope = j.at("trend_slope").get<double>();
  r.dominant_period.reset();
  r.level_shift_index.reset();
  r.context_deviation.reset();
  if (j.contains("dominant_period")) r.dominant_period = j["dominant_period"].get<std::size_t>();
  if (j.contains("level_shift_index")) {
    r.level_shift_index = j["level_shift_index"].get<std::size_t>();
  }
  if (j.contains("context_deviation")) r.context_deviation = decode_extended(j["context_deviation"]);
}

void to_json(nlohmann::json& j, const CandidateInterval& c) {
  j = {{"start", c.start}, {"end", c.end}, {"saliency", c.saliency}};
}

void from_json(const nlohmann::json& j, CandidateInterval& c) {
  c.start = j.at("start").get<std::size_t>();
  c.end = j.at("end").get<std::size_t>();
  c.saliency = j.at("saliency").get<double>();
}

void to_json(nlohmann::json& j, const KnowledgeRecord& r) {
  j = {{"id", r.id}, {"kind", to_string(r.kind)}, {"tags", r.tags}, {"body", r.body}};
}

void from_json(const nlohmann::json& j, KnowledgeRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.kind = record_kind_from_string(j.at("kind").get<std::string>());
  r.tags = j.at("tags").get<std::vector<std::string>>();
  r.body = j.at("body").get<std::string>();
}

void to_json(nlohmann::json& j, const ToolResult& r) {
  nlohmann::json payload;
  std::string kind;
  std::visit(
      [&](const auto& value) {
        using T = std::decay_t<decltype(value)>;
        payload = value;
        if constexpr (std::is_same_v<T, StatSummary>) kind = "stats";
        else if constexpr (std::is_same_v<T, ZScoreReport>) kind = "zscore";
        else if constexpr (std::is_same_v<T, StructureReport>) kind = "structure";
        else if constexpr (std::is_same_v<T, std::vector<KnowledgeRecord>>) kind = "knowledge";
        else kind = "candidates";
      },
      r.payload);
  j = {{"tool", r.tool}, {"payload_kind", kind}, {"payload", std::move(payload)},
       {"summary", r.summary}};
}

void from_json(const nlohmann::json& j, ToolResult& r) {
  r.tool = j.at("tool").get<std::string>();
  r.summary = j.at("summary").get<std::string>();
  const auto kind = j.at("payload_kind").get<std::string>();
  const auto& payload = j.at("payload");
  if (kind == "stats") {
    r.payload = payload.get<StatSummary>();
  } else if (kind == "zscore") {
    r.payload = payload.get<ZScoreReport>();
  } else if (kind == "structure") {
    r.payload = payload.get<StructureReport>();
  } else if (kind == "knowledge") {
    r.payload = payload.get<std::vector<KnowledgeRecord>>();
  } else if (kind == "candidates") {
    r.payload = payload.get<std::vector<CandidateInterval>>();
  } else {
    raise(ErrorCode::ParseError, "unknown payload kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const ToolCall& c) {
  j = {{"tool", c.tool}, {"params", c.params}};
}

void from_json(const nlohmann::json& j, ToolCall& c) {
  c.tool = j.at("tool").get<std::string>();
  c.params.clear();
  if (j.contains("params")) {
    for (const auto& [key, value] : j.at("params").items()) c.params[key] = value;
  }
}

}  // namespace anomamind
