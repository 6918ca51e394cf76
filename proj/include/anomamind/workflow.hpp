#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anomamind/backend.hpp"
#include "anomamind/protocol.hpp"
#include "anomamind/series.hpp"
#include "anomamind/tools.hpp"

namespace anomamind {

enum class LocalizationMode { proxy, backend };

const char* to_string(LocalizationMode mode);
LocalizationMode localization_mode_from_string(const std::string& name);

struct WorkflowConfig {
  int max_refinements = 2;  // K: extra passes after the first
  int tool_budget = 12;     // dispatched calls per episode, across iterations
  std::map<AgentRole, BackendConfig> backends;  // absent role -> heuristic
  LocalizationMode localization = LocalizationMode::proxy;
  BackendConfig perception;  // used when localization == backend
  std::size_t max_candidates = 3;
  PromptSet prompts;  // empty members fall back to the embedded templates
  std::shared_ptr<const KnowledgeStore> knowledge;  // nullptr -> builtin

  // Instantiated backends win over the configs above; used by scripted
  // tests and by trace replay.
  std::map<AgentRole, std::shared_ptr<Backend>> backend_overrides;
  std::shared_ptr<Backend> perception_override;

  BackendConfig backend_for(AgentRole role) const;
};

/// Mutable state of one episode as it walks the stages.
struct EpisodeState {
  Window window;
  std::vector<CandidateInterval> candidates;
  std::optional<LocatorPlan> plan;
  std::vector<ToolResult> tool_results;
  std::vector<AnomalyVerdict> verdicts;
  std::optional<EvaluatorReport> evaluator;
  int iteration = 0;
};

struct TraceEvent {
  int seq = 0;
  std::string stage;  // localize | locator | actor | tool | detector | evaluator | note
  std::string kind;   // complete | tool | note
  std::string role;
  std::string request_digest;
  std::string raw_reply;
  nlohmann::json parsed;  // parsed value or {"error": ...}
  std::string tool;
  nlohmann::json params;
  std::int64_t duration_us = 0;
  std::string timestamp;  // metadata only; excluded from digests and replay
  std::string note;
};

struct EpisodeFailure {
  ErrorCode code = ErrorCode::RoleFailure;
  std::string role;
  std::string message;
};

struct EpisodeTrace {
  nlohmann::json config_snapshot;
  Window window;
  std::vector<TraceEvent> events;
  std::vector<AnomalyVerdict> final_verdicts;
  int iterations = 0;
  bool refinement_exhausted = false;
  std::optional<EpisodeFailure> failure;

  std::size_t tool_call_count() const;
  std::size_t complete_call_count() const;
};

void save_trace(const EpisodeTrace& trace, const std::string& path);
EpisodeTrace load_trace(const std::string& path);
std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(const std::string& text);

struct EpisodeResult {
  std::vector<AnomalyVerdict> verdicts;
  EpisodeTrace trace;

  bool ok() const { return !trace.failure.has_value(); }
};

/// Runs localization -> locator -> actor -> detector -> evaluator, looping
/// back to the locator on refinement up to K extra passes. The window must
/// already be normalized. Failures are reported in the trace, which is
/// always complete.
EpisodeResult run_episode(const Window& window, const WorkflowConfig& config);

/// Merges overlapping or gap-close verdicts of the same type into their
/// hull; confidence is the max, explanations are joined.
std::vector<AnomalyVerdict> merge_verdicts(std::vector<AnomalyVerdict> verdicts, long gap = 3);

struct ReplayOutcome {
  std::vector<AnomalyVerdict> verdicts;
  bool matches_recorded = false;
  std::string divergence;  // empty when byte-identical
};

/// Re-executes parsing and state transitions from the recorded raw replies.
/// Digest mismatches and structural damage raise TraceCorrupt; a tampered
/// reply that still parses shows up as a reported divergence.
ReplayOutcome replay_episode(const EpisodeTrace& trace);

struct DatasetResult {
  std::vector<int> labels;  // per-point union of final verdict intervals
  std::vector<AnomalyVerdict> verdicts;
  std::vector<EpisodeTrace> traces;  // one per window, in window order
  std::size_t failed_episodes = 0;
};

/// Preprocesses the series (linear detrend unless disabled, then min-max
/// normalization), segments it, and runs one episode per window (optionally
/// on a worker pool). Episode failures are recorded without aborting the
/// remaining windows.
DatasetResult run_dataset(const TimeSeries& series, const WorkflowConfig& config,
                          std::size_t window_length = 100, std::size_t step = 100,
                          std::size_t min_tail = 20, unsigned workers = 1,
                          bool detrend_first = true);

}  // namespace anomamind
