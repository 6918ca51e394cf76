#include "anomamind/workflow.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "anomamind/eval.hpp"

namespace anomamind {

const char* to_string(LocalizationMode mode) {
  return mode == LocalizationMode::proxy ? "proxy" : "backend";
}

LocalizationMode localization_mode_from_string(const std::string& name) {
  if (name == "proxy") return LocalizationMode::proxy;
  if (name == "backend") return LocalizationMode::backend;
  raise(ErrorCode::ConfigError, "unknown localization mode '" + name + "'");
}

BackendConfig WorkflowConfig::backend_for(AgentRole role) const {
  auto it = backends.find(role);
  return it == backends.end() ? BackendConfig{} : it->second;
}

std::size_t EpisodeTrace::tool_call_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.kind == "tool" ? 1 : 0;
  return n;
}

std::size_t EpisodeTrace::complete_call_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.kind == "complete" ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json window_to_json(const Window& w) {
  return {{"parent", w.parent}, {"start", w.start}, {"end", w.end}, {"values", w.values}};
}

Window window_from_json(const nlohmann::json& j) {
  Window w;
  w.parent = j.at("parent").get<std::string>();
  w.start = j.at("start").get<std::size_t>();
  w.end = j.at("end").get<std::size_t>();
  w.values = j.at("values").get<std::vector<double>>();
  return w;
}

nlohmann::json event_to_json(const TraceEvent& e) {
  nlohmann::json j = {{"seq", e.seq},       {"stage", e.stage}, {"kind", e.kind},
                      {"duration_us", e.duration_us}, {"timestamp", e.timestamp}};
  if (!e.role.empty()) j["role"] = e.role;
  if (!e.request_digest.empty()) j["request_digest"] = e.request_digest;
  if (!e.raw_reply.empty()) j["raw_reply"] = e.raw_reply;
  if (!e.parsed.is_null()) j["parsed"] = e.parsed;
  if (!e.tool.empty()) j["tool"] = e.tool;
  if (!e.params.is_null()) j["params"] = e.params;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

TraceEvent event_from_json(const nlohmann::json& j) {
  TraceEvent e;
  e.seq = j.at("seq").get<int>();
  e.stage = j.at("stage").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.duration_us = j.value("duration_us", 0L);
  e.timestamp = j.value("timestamp", std::string());
  e.role = j.value("role", std::string());
  e.request_digest = j.value("request_digest", std::string());
  e.raw_reply = j.value("raw_reply", std::string());
  if (j.contains("parsed")) e.parsed = j["parsed"];
  e.tool = j.value("tool", std::string());
  if (j.contains("params")) e.params = j["params"];
  e.note = j.value("note", std::string());
  return e;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                      now.time_since_epoch())
                      .count() %
                  1000000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                tm.tm_sec, static_cast<int>(us));
  return buf;
}

}  // namespace

std::string trace_to_jsonl(const EpisodeTrace& trace) {
  std::ostringstream out;
  nlohmann::json header = {{"kind", "header"},
                           {"config", trace.config_snapshot},
                           {"window", window_to_json(trace.window)}};
  out << header.dump() << '\n';
  for (const auto& e : trace.events) out << event_to_json(e).dump() << '\n';
  nlohmann::json final_line = {{"kind", "final"},
                               {"verdicts", trace.final_verdicts},
                               {"iterations", trace.iterations},
                               {"refinement_exhausted", trace.refinement_exhausted}};
  if (trace.failure) {
    final_line["failure"] = {{"code", to_string(trace.failure->code)},
                             {"role", trace.failure->role},
                             {"message", trace.failure->message}};
  }
  out << final_line.dump() << '\n';
  return out.str();
}

EpisodeTrace trace_from_jsonl(const std::string& text) {
  EpisodeTrace trace;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  bool have_final = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise(ErrorCode::TraceCorrupt, "line " + std::to_string(line_no) + ": bad JSON");
    }
    try {
      if (j.value("kind", std::string()) == "header") {
        trace.config_snapshot = j.at("config");
        trace.window = window_from_json(j.at("window"));
        have_header = true;
      } else if (j.value("kind", std::string()) == "final") {
        trace.final_verdicts = j.at("verdicts").get<std::vector<AnomalyVerdict>>();
        trace.iterations = j.value("iterations", 0);
        trace.refinement_exhausted = j.value("refinement_exhausted", false);
        if (j.contains("failure")) {
          EpisodeFailure f;
          f.role = j["failure"].value("role", std::string());
          f.message = j["failure"].value("message", std::string());
          f.code = ErrorCode::RoleFailure;
          trace.failure = f;
        }
        have_final = true;
      } else {
        trace.events.push_back(event_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TraceCorrupt, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header || !have_final) {
    raise(ErrorCode::TraceCorrupt, "trace needs a header and a final line");
  }
  if (trace.events.empty()) raise(ErrorCode::TraceCorrupt, "trace has no events");
  return trace;
}

void save_trace(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::FileMissing, "cannot open for write: " + path);
  out << trace_to_jsonl(trace);
}

EpisodeTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::FileMissing, path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return trace_from_jsonl(buffer.str());
}

// ---------------------------------------------------------------------------
// Episode engine
// ---------------------------------------------------------------------------

namespace {

struct EpisodeAbort {
  EpisodeFailure failure;
};

std::shared_ptr<const KnowledgeStore> resolved_knowledge(const WorkflowConfig& config) {
  if (config.knowledge) return config.knowledge;
  static const auto builtin = std::make_shared<const KnowledgeStore>(KnowledgeStore::builtin());
  return builtin;
}

PromptSet resolved_prompts(const WorkflowConfig& config) {
  PromptSet prompts = PromptSet::builtin();
  if (!config.prompts.locator.empty()) prompts.locator = config.prompts.locator;
  if (!config.prompts.actor.empty()) prompts.actor = config.prompts.actor;
  if (!config.prompts.detector.empty()) prompts.detector = config.prompts.detector;
  if (!config.prompts.evaluator.empty()) prompts.evaluator = config.prompts.evaluator;
  return prompts;
}

nlohmann::json snapshot_config(const WorkflowConfig& config, const PromptSet& prompts,
                               const KnowledgeStore& knowledge) {
  nlohmann::json backends = nlohmann::json::object();
  for (AgentRole role :
       {AgentRole::locator, AgentRole::actor, AgentRole::detector, AgentRole::evaluator}) {
    const auto bc = config.backend_for(role);
    backends[to_string(role)] = {{"kind", to_string(bc.kind)},
                                 {"temperature", bc.temperature}};
  }
  return {{"max_refinements", config.max_refinements},
          {"tool_budget", config.tool_budget},
          {"localization", to_string(config.localization)},
          {"max_candidates", config.max_candidates},
          {"backends", std::move(backends)},
          {"perception_temperature", config.perception.temperature},
          {"prompts",
           {{"locator", prompts.locator},
            {"actor", prompts.actor},
            {"detector", prompts.detector},
            {"evaluator", prompts.evaluator}}},
          {"knowledge", knowledge.to_json()}};
}

std::string knowledge_fragment(const KnowledgeStore& store) {
  std::ostringstream out;
  for (const auto& r : store.records()) {
    out << "- [" << r.id << "] (" << to_string(r.kind) << ") " << r.body << '\n';
  }
  return out.str();
}

std::string values_fragment(const Window& window) {
  nlohmann::json values = window.values;
  return values.dump();
}

std::string range_fragment(const Window& window) {
  return "[" + std::to_string(window.start) + ", " + std::to_string(window.end) + ")";
}

class Engine {
 public:
  Engine(const Window& window, const WorkflowConfig& config)
      : config_(config),
        prompts_(resolved_prompts(config)),
        knowledge_(resolved_knowledge(config)) {
    state_.window = window;
    trace_.window = window;
    trace_.config_snapshot = snapshot_config(config, prompts_, *knowledge_);
  }

  EpisodeResult run() {
    try {
      localize();
      if (state_.candidates.empty()) {
        note("localize", "short_circuit: no candidate intervals");
      } else {
        iterate();
      }
    } catch (const EpisodeAbort& abort) {
      trace_.failure = abort.failure;
      state_.verdicts.clear();
    } catch (const Error& e) {
      trace_.failure = EpisodeFailure{e.code(), "", e.what()};
      state_.verdicts.clear();
    }
    trace_.iterations = std::max(state_.iteration, 1);
    trace_.final_verdicts = merge_verdicts(state_.verdicts);
    return {trace_.final_verdicts, std::move(trace_)};
  }

 private:
  std::shared_ptr<Backend> role_backend(AgentRole role) {
    auto it = backends_.find(role);
    if (it != backends_.end()) return it->second;
    auto override_it = config_.backend_overrides.find(role);
    std::shared_ptr<Backend> backend =
        override_it != config_.backend_overrides.end()
            ? override_it->second
            : std::shared_ptr<Backend>(make_backend(config_.backend_for(role)));
    backends_[role] = backend;
    return backend;
  }

  std::shared_ptr<Backend> perception_backend() {
    if (config_.perception_override) return config_.perception_override;
    if (!perception_) perception_ = make_backend(config_.perception);
    return perception_;
  }

  TraceEvent& push_event(const std::string& stage, const std::string& kind) {
    TraceEvent event;
    event.seq = static_cast<int>(trace_.events.size());
    event.stage = stage;
    event.kind = kind;
    event.timestamp = now_iso8601();
    trace_.events.push_back(std::move(event));
    return trace_.events.back();
  }

  void note(const std::string& stage, const std::string& text,
            nlohmann::json parsed = nlohmann::json()) {
    auto& event = push_event(stage, "note");
    event.note = text;
    event.parsed = std::move(parsed);
  }

  /// Sends one completion request for the role and records it.
  std::string complete_once(AgentRole role, const std::string& stage,
                            const std::string& prompt) {
    auto backend = role_backend(role);
    const std::vector<ChatTurn> messages = {
        {ChatRole::system, std::string("anomamind role: ") + to_string(role)},
        {ChatRole::user, prompt}};
    const std::string digest = request_digest(backend->temperature(), messages);

    auto& event = push_event(stage, "complete");
    event.role = to_string(role);
    event.request_digest = digest;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      event.raw_reply = backend->complete(messages);
    } catch (const Error& e) {
      event.note = std::string("backend error: ") + e.what();
      event.duration_us = std::chrono::duration_cast<std::chrono::microseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
      throw EpisodeAbort{{e.code(), to_string(role), e.what()}};
    }
    event.duration_us = std::chrono::duration_cast<std::chrono::microseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    return event.raw_reply;
  }

  /// The one-retry rule: a parse failure re-prompts the same role exactly
  /// once with the parser error appended; a second failure aborts.
  template <typename Parser>
  auto complete_with_retry(AgentRole role, const std::string& stage,
                           const std::string& prompt, Parser&& parser) {
    std::string attempt_prompt = prompt;
    for (int attempt = 0;; ++attempt) {
      const std::string reply = complete_once(role, stage, attempt_prompt);
      try {
        auto parsed = parser(reply);
        trace_.events.back().parsed = nlohmann::json(parsed);
        return parsed;
      } catch (const Error& e) {
        trace_.events.back().parsed = {{"error", e.what()}};
        if (attempt == 1) {
          throw EpisodeAbort{{ErrorCode::RoleFailure, to_string(role),
                              std::string("after retry: ") + e.what()}};
        }
        attempt_prompt = prompt +
                         "\n\nYour previous reply could not be parsed: " + e.what() +
                         "\nReply again following the required format exactly.";
      }
    }
  }

  void localize() {
    if (config_.localization == LocalizationMode::backend) {
      auto backend = perception_backend();
      auto fn = [&](const std::string& request) {
        const std::vector<ChatTurn> messages = {
            {ChatRole::system, "anomamind role: perception"}, {ChatRole::user, request}};
        auto& event = push_event("localize", "complete");
        event.role = "perception";
        event.request_digest = request_digest(backend->temperature(), messages);
        event.raw_reply = backend->complete(messages);
        return event.raw_reply;
      };
      auto outcome = localize_candidates(state_.window, fn, config_.max_candidates);
      if (outcome.fell_back) {
        note("localize", "perception reply unparseable, fell back to proxy: " + outcome.note);
      }
      state_.candidates = std::move(outcome.candidates);
    } else {
      state_.candidates = localize_candidates(state_.window, config_.max_candidates);
    }
    note("localize", "candidates", nlohmann::json(state_.candidates));
  }

  std::map<std::string, std::string> locator_context(const std::string& feedback) const {
    return {{"range", range_fragment(state_.window)},
            {"Time Series Values", values_fragment(state_.window)},
            {"Vision anomaly intervals", nlohmann::json(state_.candidates).dump()},
            {"Available Tools", tool_catalog_text()},
            {"Domain Knowledge", knowledge_fragment(*knowledge_)},
            {"Evaluator Feedback", feedback.empty() ? "(none)" : feedback},
            {"Iteration", std::to_string(state_.iteration)}};
  }

  void run_tools(const std::vector<ToolCall>& calls, std::vector<ToolResult>& iteration_results) {
    ToolContext context{&state_.window, knowledge_.get()};
    for (const auto& call : calls) {
      if (static_cast<int>(trace_.tool_call_count()) >= config_.tool_budget) {
        note("actor", "tool budget exhausted");
        throw EpisodeAbort{{ErrorCode::ToolBudgetExceeded, "actor",
                            "episode exceeded " + std::to_string(config_.tool_budget) +
                                " tool calls"}};
      }
      auto& event = push_event("tool", "tool");
      event.tool = call.tool;
      event.params = call.params;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        ToolResult result = dispatch(call, context);
        event.parsed = result;
        state_.tool_results.push_back(result);
        iteration_results.push_back(std::move(result));
      } catch (const Error& e) {
        event.parsed = {{"error", e.what()}};
      }
      event.duration_us = std::chrono::duration_cast<std::chrono::microseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    }
  }

  /// Clamps detector intervals into the window; a verdict entirely outside
  /// is dropped (noted in the trace).
  void accept_verdicts(std::vector<AnomalyVerdict> verdicts) {
    state_.verdicts.clear();
    const auto lo = static_cast<long>(state_.window.start);
    const auto hi = static_cast<long>(state_.window.end) - 1;
    std::size_t dropped = 0;
    for (auto& v : verdicts) {
      if (v.end < lo || v.start > hi) {
        ++dropped;
        continue;
      }
      v.start = std::max(v.start, lo);
      v.end = std::min(v.end, hi);
      state_.verdicts.push_back(std::move(v));
    }
    if (dropped > 0) {
      note("detector", std::to_string(dropped) + " verdict(s) outside the window dropped");
    }
  }

  void iterate() {
    std::string feedback;
    while (true) {
      ++state_.iteration;

      state_.plan = complete_with_retry(
          AgentRole::locator, "locator",
          render_template(prompts_.locator, locator_context(feedback)),
          [](const std::string& reply) {
            auto plan = parse_locator_plan(reply);
            return plan;
          });

      const auto calls = complete_with_retry(
          AgentRole::actor, "actor",
          render_template(prompts_.actor,
                          {{"Plan", state_.plan->plan},
                           {"range", range_fragment(state_.window)},
                           {"Time Series Values", values_fragment(state_.window)}}),
          parse_actor_calls);

      std::vector<ToolResult> iteration_results;
      run_tools(calls, iteration_results);

      accept_verdicts(complete_with_retry(
          AgentRole::detector, "detector",
          render_template(prompts_.detector,
                          {{"Plan", state_.plan->plan},
                           {"Used_Tool_Description", nlohmann::json(iteration_results).dump()},
                           {"Domain Knowledge", knowledge_fragment(*knowledge_)},
                           {"range", range_fragment(state_.window)},
                           {"Iteration", std::to_string(state_.iteration)}}),
          parse_detector_verdicts));

      state_.evaluator = complete_with_retry(
          AgentRole::evaluator, "evaluator",
          render_template(prompts_.evaluator,
                          {{"Plan", state_.plan->plan},
                           {"Detector Result", nlohmann::json(state_.verdicts).dump()},
                           {"Iteration", std::to_string(state_.iteration)}}),
          parse_evaluator_report);

      if (!state_.evaluator->needs_refinement) break;
      if (state_.iteration > config_.max_refinements) {
        trace_.refinement_exhausted = true;
        note("evaluator", "refinement_exhausted: bound K reached");
        break;
      }
      std::ostringstream fb;
      for (const auto& issue : state_.evaluator->issues) fb << "issue: " << issue << "\n";
      for (const auto& s : state_.evaluator->suggestions) fb << "suggestion: " << s << "\n";
      feedback = fb.str();
      note("evaluator", "refinement requested, re-entering locator");
    }
  }

  const WorkflowConfig& config_;
  PromptSet prompts_;
  std::shared_ptr<const KnowledgeStore> knowledge_;
  EpisodeState state_;
  EpisodeTrace trace_;
  std::map<AgentRole, std::shared_ptr<Backend>> backends_;
  std::shared_ptr<Backend> perception_;
};

}  // namespace

EpisodeResult run_episode(const Window& window, const WorkflowConfig& config) {
  Engine engine(window, config);
  return engine.run();
}

std::vector<AnomalyVerdict> merge_verdicts(std::vector<AnomalyVerdict> verdicts, long gap) {
  std::map<std::string, std::vector<AnomalyVerdict>> by_type;
  for (auto& v : verdicts) by_type[v.type].push_back(std::move(v));

  std::vector<AnomalyVerdict> merged;
  for (auto& [type, group] : by_type) {
    std::sort(group.begin(), group.end(), [](const AnomalyVerdict& a, const AnomalyVerdict& b) {
      return a.start < b.start || (a.start == b.start && a.end < b.end);
    });
    for (auto& v : group) {
      if (!merged.empty() && merged.back().type == type &&
          v.start <= merged.back().end + gap) {
        auto& last = merged.back();
        last.end = std::max(last.end, v.end);
        last.confidence = std::max(last.confidence, v.confidence);
        if (!v.explanation.empty() && v.explanation != last.explanation) {
          last.explanation += "; " + v.explanation;
        }
      } else {
        merged.push_back(std::move(v));
      }
    }
  }
  std::sort(merged.begin(), merged.end(), [](const AnomalyVerdict& a, const AnomalyVerdict& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.type < b.type;
  });
  return merged;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

/// Hands out the recorded completion replies in order, verifying that the
/// re-rendered requests digest-match the recording.
class TraceCursor {
 public:
  explicit TraceCursor(const EpisodeTrace& trace) {
    for (const auto& e : trace.events) {
      if (e.kind == "complete") events_.push_back(&e);
    }
  }

  std::string next(const std::string& digest) {
    if (index_ >= events_.size()) {
      raise(ErrorCode::TraceCorrupt, "replay ran past the recorded completion events");
    }
    const TraceEvent* event = events_[index_++];
    if (event->request_digest != digest) {
      raise(ErrorCode::TraceCorrupt,
            "event " + std::to_string(event->seq) + ": request digest mismatch (recorded " +
                event->request_digest + ", replayed " + digest + ")");
    }
    return event->raw_reply;
  }

 private:
  std::vector<const TraceEvent*> events_;
  std::size_t index_ = 0;
};

class TraceReplayBackend : public Backend {
 public:
  TraceReplayBackend(std::shared_ptr<TraceCursor> cursor, double temperature)
      : cursor_(std::move(cursor)), temperature_(temperature) {}

  std::string complete(const std::vector<ChatTurn>& messages) override {
    return cursor_->next(request_digest(temperature_, messages));
  }

  double temperature() const override { return temperature_; }

 private:
  std::shared_ptr<TraceCursor> cursor_;
  double temperature_;
};

}  // namespace

ReplayOutcome replay_episode(const EpisodeTrace& trace) {
  if (trace.events.empty()) raise(ErrorCode::TraceCorrupt, "trace has no events");
  const auto& snapshot = trace.config_snapshot;
  if (!snapshot.is_object()) raise(ErrorCode::TraceCorrupt, "trace has no config snapshot");

  WorkflowConfig config;
  try {
    config.max_refinements = snapshot.at("max_refinements").get<int>();
    config.tool_budget = snapshot.at("tool_budget").get<int>();
    config.localization =
        localization_mode_from_string(snapshot.at("localization").get<std::string>());
    config.max_candidates = snapshot.at("max_candidates").get<std::size_t>();
    config.prompts.locator = snapshot.at("prompts").at("locator").get<std::string>();
    config.prompts.actor = snapshot.at("prompts").at("actor").get<std::string>();
    config.prompts.detector = snapshot.at("prompts").at("detector").get<std::string>();
    config.prompts.evaluator = snapshot.at("prompts").at("evaluator").get<std::string>();
    config.knowledge = std::make_shared<const KnowledgeStore>(
        KnowledgeStore::from_json(snapshot.at("knowledge")));

    auto cursor = std::make_shared<TraceCursor>(trace);
    for (AgentRole role :
         {AgentRole::locator, AgentRole::actor, AgentRole::detector, AgentRole::evaluator}) {
      const double temperature =
          snapshot.at("backends").at(to_string(role)).at("temperature").get<double>();
      config.backend_overrides[role] =
          std::make_shared<TraceReplayBackend>(cursor, temperature);
    }
    config.perception_override = std::make_shared<TraceReplayBackend>(
        cursor, snapshot.value("perception_temperature", 0.7));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::TraceCorrupt, std::string("bad config snapshot: ") + e.what());
  } catch (const Error& e) {
    raise(ErrorCode::TraceCorrupt, std::string("bad config snapshot: ") + e.what());
  }

  auto result = run_episode(trace.window, config);
  if (result.trace.failure && result.trace.failure->code == ErrorCode::TraceCorrupt) {
    raise(ErrorCode::TraceCorrupt, result.trace.failure->message);
  }

  ReplayOutcome outcome;
  outcome.verdicts = result.verdicts;
  outcome.matches_recorded = result.verdicts == trace.final_verdicts;
  if (!outcome.matches_recorded) {
    outcome.divergence = "replayed " + std::to_string(result.verdicts.size()) +
                         " verdict(s), recorded " +
                         std::to_string(trace.final_verdicts.size()) +
                         " (or fields differ)";
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Dataset runs
// ---------------------------------------------------------------------------

DatasetResult run_dataset(const TimeSeries& series, const WorkflowConfig& config,
                          std::size_t window_length, std::size_t step,
                          std::size_t min_tail, unsigned workers, bool detrend_first) {
  if (series.size() == 0) raise(ErrorCode::EmptySeries, series.name);

  TimeSeries prepared = series;
  if (detrend_first && prepared.size() >= 2) prepared = detrend(prepared);
  // A flat series cannot be min-max scaled; its windows short-circuit at
  // localization anyway, so it runs unscaled.
  const auto [lo, hi] = std::minmax_element(prepared.values.begin(), prepared.values.end());
  if (prepared.size() >= 2 && *hi > *lo) prepared = normalize(prepared).first;

  const auto windows = segment_windows(prepared, window_length, step, min_tail);
  std::vector<EpisodeResult> results(windows.size());

  const unsigned pool = std::max(1u, std::min<unsigned>(workers, windows.size()));
  if (pool <= 1) {
    for (std::size_t i = 0; i < windows.size(); ++i) results[i] = run_episode(windows[i], config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (unsigned t = 0; t < pool; ++t) {
      threads.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= windows.size()) return;
          results[i] = run_episode(windows[i], config);
        }
      });
    }
    for (auto& thread : threads) thread.join();
  }

  DatasetResult out;
  out.labels.assign(series.size(), 0);
  for (auto& result : results) {
    if (!result.ok()) ++out.failed_episodes;
    for (const auto& v : result.verdicts) out.verdicts.push_back(v);
    out.traces.push_back(std::move(result.trace));
  }
  out.labels = verdicts_to_labels(out.verdicts, series.size(), 1);
  std::sort(out.verdicts.begin(), out.verdicts.end(),
            [](const AnomalyVerdict& a, const AnomalyVerdict& b) {
              if (a.start != b.start) return a.start < b.start;
              if (a.end != b.end) return a.end < b.end;
              return a.type < b.type;
            });
  return out;
}

}  // namespace anomamind
