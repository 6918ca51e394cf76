#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "anomamind/error.hpp"
#include "anomamind/series.hpp"

namespace anomamind {

enum class Scope { local, global };

const char* to_string(Scope scope);
Scope scope_from_string(const std::string& name);

/// Descriptive statistics of one window (population conventions, divide by n).
struct StatSummary {
  double mean = 0.0;
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  std::size_t n = 0;
};

struct ZScorePoint {
  std::size_t index = 0;  // index into the first-difference sequence
  double z = 0.0;
};

/// Standardized first differences. Indices refer to diffs: diff i sits
/// between window points i and i+1.
struct ZScoreReport {
  Scope scope = Scope::global;
  std::vector<ZScorePoint> scores;
  std::vector<std::size_t> outlier_indices;  // |z| >= threshold
  double threshold = 3.0;
  bool degenerate = false;  // some standardizing spread was zero
};

/// Trend/periodicity/level-shift summary. context_deviation is filled only
/// for the local scope and may be +infinity over a flat context.
struct StructureReport {
  Scope scope = Scope::global;
  double trend_slope = 0.0;
  std::optional<std::size_t> dominant_period;
  std::optional<std::size_t> level_shift_index;
  std::optional<double> context_deviation;
};

/// Coarse candidate produced by interval localization; window-relative,
/// end exclusive.
struct CandidateInterval {
  std::size_t start = 0;
  std::size_t end = 0;
  double saliency = 0.0;
};

enum class RecordKind { anomaly_type, domain, tool_semantics };

const char* to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& name);

struct KnowledgeRecord {
  std::string id;
  RecordKind kind = RecordKind::domain;
  std::vector<std::string> tags;
  std::string body;
};

/// Immutable store of knowledge records, unique ids, ordered by id.
class KnowledgeStore {
 public:
  KnowledgeStore() = default;
  explicit KnowledgeStore(std::vector<KnowledgeRecord> records);

  /// The seed store: the five taxonomy entries, one domain note per
  /// synthetic base, and one semantics note per registered tool.
  static KnowledgeStore builtin();
  static KnowledgeStore load(const std::string& path);
  static KnowledgeStore from_json(const nlohmann::json& j);

  const std::vector<KnowledgeRecord>& records() const { return records_; }
  bool has_anomaly_type(const std::string& name) const;
  nlohmann::json to_json() const;

 private:
  std::vector<KnowledgeRecord> records_;  // sorted by id
};

using ToolPayload = std::variant<StatSummary, ZScoreReport, StructureReport,
                                 std::vector<KnowledgeRecord>,
                                 std::vector<CandidateInterval>>;

/// One tool invocation result: structured payload plus a deterministic text
/// rendering for prompt injection.
struct ToolResult {
  std::string tool;
  ToolPayload payload;
  std::string summary;
};

/// Scalar-only parameter map for a named tool call.
using ToolParams = std::map<std::string, nlohmann::json>;

struct ToolCall {
  std::string tool;
  ToolParams params;
};

// ---------------------------------------------------------------------------
// Tool implementations
// ---------------------------------------------------------------------------

ToolResult stat_features(const Window& window);

ToolResult diff_zscore(const Window& window, Scope scope, int radius = 10,
                       double threshold = 3.0);

ToolResult global_structure(const Window& window);

/// Deviation of [start, end) against flanking context of equal length on
/// each side (clipped to the window).
ToolResult local_structure(const Window& window, std::size_t start, std::size_t end);

ToolResult query_knowledge(const KnowledgeStore& store,
                           const std::vector<std::string>& tags,
                           std::optional<RecordKind> kind);

/// Deterministic localization proxy: spectral-residual saliency thresholded
/// at mean + 2 std, runs merged when closer than 5, widened by 3, top
/// max_candidates by peak saliency. Output disjoint, sorted, in bounds.
std::vector<CandidateInterval> localize_candidates(const Window& window,
                                                   std::size_t max_candidates = 3);

struct LocalizationOutcome {
  std::vector<CandidateInterval> candidates;
  bool used_backend = false;
  bool fell_back = false;   // backend reply unparseable, proxy used instead
  std::string note;
};

/// Localization with a pluggable perception backend. The callable receives
/// the rendered localization request and returns the backend's raw reply;
/// an unparseable reply falls back to the proxy.
LocalizationOutcome localize_candidates(
    const Window& window,
    const std::function<std::string(const std::string&)>& perception,
    std::size_t max_candidates = 3);

/// Parses a perception reply: a JSON array of [start, end] pairs or
/// {"start", "end"} objects, window-relative. Throws BackendReplyUnparseable.
std::vector<CandidateInterval> parse_interval_reply(const std::string& reply,
                                                    std::size_t window_size,
                                                    std::size_t max_candidates);

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

struct ToolContext {
  const Window* window = nullptr;
  const KnowledgeStore* knowledge = nullptr;
};

/// Routes a named call to its implementation after validating parameters.
ToolResult dispatch(const ToolCall& call, const ToolContext& context);

/// Registered tool names, in registry order.
const std::vector<std::string>& registered_tools();

/// Human-readable catalog used for the {Available Tools} prompt fragment.
std::string tool_catalog_text();

// ---------------------------------------------------------------------------
// Serialization (lossless payload round trip)
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const StatSummary& s);
void from_json(const nlohmann::json& j, StatSummary& s);
void to_json(nlohmann::json& j, const ZScoreReport& r);
void from_json(const nlohmann::json& j, ZScoreReport& r);
void to_json(nlohmann::json& j, const StructureReport& r);
void from_json(const nlohmann::json& j, StructureReport& r);
void to_json(nlohmann::json& j, const CandidateInterval& c);
void from_json(const nlohmann::json& j, CandidateInterval& c);
void to_json(nlohmann::json& j, const KnowledgeRecord& r);
void from_json(const nlohmann::json& j, KnowledgeRecord& r);
void to_json(nlohmann::json& j, const ToolResult& r);
void from_json(const nlohmann::json& j, ToolResult& r);
void to_json(nlohmann::json& j, const ToolCall& c);
void from_json(const nlohmann::json& j, ToolCall& c);

}  // namespace anomamind
