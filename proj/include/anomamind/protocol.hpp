#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "anomamind/tools.hpp"

namespace anomamind {

enum class ChatRole { system, user, assistant };

const char* to_string(ChatRole role);

struct ChatTurn {
  ChatRole role = ChatRole::user;
  std::string content;
};

enum class AgentRole { locator, actor, detector, evaluator };

const char* to_string(AgentRole role);

/// The four role templates, defaulting to the embedded copies of
/// prompts/*.txt. Custom templates must keep the same placeholders.
struct PromptSet {
  std::string locator;
  std::string actor;
  std::string detector;
  std::string evaluator;

  static PromptSet builtin();
  /// Loads locator.txt / actor.txt / detector.txt / evaluator.txt from a
  /// directory.
  static PromptSet load(const std::string& dir);

  const std::string& for_role(AgentRole role) const;
};

/// Substitutes every {placeholder} in the template from the context map.
/// A placeholder without a supplied fragment raises MissingPlaceholder;
/// fragments are spliced verbatim and never re-scanned.
std::string render_template(const std::string& template_text,
                            const std::map<std::string, std::string>& context);

/// render_template over the embedded template of the given role.
std::string render_prompt(AgentRole role, const std::map<std::string, std::string>& context);

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

struct LocatorPlan {
  std::string think;
  std::string plan;
  std::map<std::string, double> declared_thresholds;
};

/// A detected anomaly. The interval is closed ([start, end] inclusive) in
/// actual data indices; type names are validated against the knowledge
/// taxonomy at reward time, not here.
struct AnomalyVerdict {
  long start = 0;
  long end = 0;
  std::string type;
  std::string explanation;
  int confidence = 1;  // 1 (low) .. 3 (high)
};

bool operator==(const AnomalyVerdict& a, const AnomalyVerdict& b);

struct EvaluatorReport {
  std::vector<std::string> issues;
  std::vector<std::string> suggestions;
  bool needs_refinement = false;
  std::map<std::string, std::string> quality_metrics;  // planning/tool_usage/reasoning
};

/// Removes every <think>...</think> block.
std::string strip_think(const std::string& reply);

/// Extracts <think> (optional) and <Plan> (required; first open to last
/// close, stray inner tags kept) and harvests `name >= x` / `name
/// threshold x` declarations from the plan text.
LocatorPlan parse_locator_plan(const std::string& reply);

/// Accepts a fenced or bare JSON array of {tool, params} objects;
/// all-or-nothing, order preserved, duplicates allowed.
std::vector<ToolCall> parse_actor_calls(const std::string& reply);

/// Strips <think>, then parses the first JSON array in the remainder. An
/// empty array is a valid "no anomaly" verdict.
std::vector<AnomalyVerdict> parse_detector_verdicts(const std::string& reply);

/// Strict JSON object with issues / suggestions / needs_refinement /
/// quality_metrics; ratings limited to good / acceptable / poor.
EvaluatorReport parse_evaluator_report(const std::string& reply);

void to_json(nlohmann::json& j, const AnomalyVerdict& v);
void from_json(const nlohmann::json& j, AnomalyVerdict& v);
void to_json(nlohmann::json& j, const EvaluatorReport& r);
void from_json(const nlohmann::json& j, EvaluatorReport& r);
void to_json(nlohmann::json& j, const LocatorPlan& p);
void from_json(const nlohmann::json& j, LocatorPlan& p);

}  // namespace anomamind
