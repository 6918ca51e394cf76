#include "anomamind/protocol.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>

#include "anomamind/embedded_assets.hpp"

namespace anomamind {

const char* to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

const char* to_string(AgentRole role) {
  switch (role) {
    case AgentRole::locator: return "locator";
    case AgentRole::actor: return "actor";
    case AgentRole::detector: return "detector";
    case AgentRole::evaluator: return "evaluator";
  }
  return "locator";
}

PromptSet PromptSet::builtin() {
  return {embedded::kLocatorPrompt, embedded::kActorPrompt, embedded::kDetectorPrompt,
          embedded::kEvaluatorPrompt};
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::FileMissing, path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

PromptSet PromptSet::load(const std::string& dir) {
  return {read_file(dir + "/locator.txt"), read_file(dir + "/actor.txt"),
          read_file(dir + "/detector.txt"), read_file(dir + "/evaluator.txt")};
}

const std::string& PromptSet::for_role(AgentRole role) const {
  switch (role) {
    case AgentRole::locator: return locator;
    case AgentRole::actor: return actor;
    case AgentRole::detector: return detector;
    case AgentRole::evaluator: return evaluator;
  }
  return locator;
}

std::string render_template(const std::string& template_text,
                            const std::map<std::string, std::string>& context) {
  std::string out;
  out.reserve(template_text.size());
  std::size_t i = 0;
  while (i < template_text.size()) {
    const char c = template_text[i];
    if (c == '{' && i + 1 < template_text.size() &&
        std::isalpha(static_cast<unsigned char>(template_text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < template_text.size()) {
        const char p = template_text[j];
        if (std::isalnum(static_cast<unsigned char>(p)) || p == '_' || p == ' ') {
          ++j;
          continue;
        }
        break;
      }
      if (j < template_text.size() && template_text[j] == '}') {
        const std::string name = template_text.substr(i + 1, j - i - 1);
        auto it = context.find(name);
        if (it == context.end()) raise(ErrorCode::MissingPlaceholder, name);
        out += it->second;  // spliced verbatim, never re-scanned
        i = j + 1;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

std::string render_prompt(AgentRole role, const std::map<std::string, std::string>& context) {
  return render_template(PromptSet::builtin().for_role(role), context);
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

bool operator==(const AnomalyVerdict& a, const AnomalyVerdict& b) {
  return a.start == b.start && a.end == b.end && a.type == b.type &&
         a.explanation == b.explanation && a.confidence == b.confidence;
}

std::string strip_think(const std::string& reply) {
  std::string out = reply;
  while (true) {
    const auto open = out.find("<think>");
    if (open == std::string::npos) return out;
    const auto close = out.find("</think>", open);
    if (close == std::string::npos) return out.substr(0, open);
    out.erase(open, close + 8 - open);
  }
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Finds the first parseable JSON value opening with `open` in `text`,
/// matching brackets outside string literals.
std::optional<nlohmann::json> first_json_value(const std::string& text, char open, char close) {
  for (std::size_t i = text.find(open); i != std::string::npos; i = text.find(open, i + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t j = i; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == open) {
        ++depth;
      } else if (c == close) {
        --depth;
        if (depth == 0) {
          auto parsed = nlohmann::json::parse(text.substr(i, j - i + 1), nullptr, false);
          if (!parsed.is_discarded()) return parsed;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

/// Content of the first fenced code block, if any (language tag ignored).
std::optional<std::string> fenced_block(const std::string& text) {
  const auto open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  auto body = text.find('\n', open);
  if (body == std::string::npos) return std::nullopt;
  const auto close = text.find("```", body);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(body + 1, close - body - 1);
}

}  // namespace

LocatorPlan parse_locator_plan(const std::string& reply) {
  LocatorPlan plan;

  const auto think_close = reply.find("</think>");
  if (think_close != std::string::npos) {
    const auto think_open = reply.rfind("<think>", think_close);
    if (think_open != std::string::npos) {
      plan.think = trim(reply.substr(think_open + 7, think_close - think_open - 7));
    }
  }

  const std::string stripped = strip_think(reply);
  const auto open = stripped.find("<Plan>");
  const auto close = stripped.rfind("</Plan>");
  if (open == std::string::npos || close == std::string::npos || close < open + 6) {
    raise(ErrorCode::MissingPlanTag, "reply carries no <Plan>...</Plan>");
  }
  plan.plan = trim(stripped.substr(open + 6, close - open - 6));
  if (plan.plan.empty()) raise(ErrorCode::MissingPlanTag, "empty plan");

  // Threshold declarations: `name >= 2.5` or `name threshold 2.5`.
  static const std::regex pattern(
      R"(([A-Za-z_][A-Za-z0-9_]*)\s*(?:>=|threshold)\s*([0-9]*\.?[0-9]+))");
  for (auto it = std::sregex_iterator(plan.plan.begin(), plan.plan.end(), pattern);
       it != std::sregex_iterator(); ++it) {
    plan.declared_thresholds[(*it)[1].str()] = std::stod((*it)[2].str());
  }
  return plan;
}

std::vector<ToolCall> parse_actor_calls(const std::string& reply) {
  std::optional<nlohmann::json> array;
  if (auto fence = fenced_block(reply)) {
    array = first_json_value(*fence, '[', ']');
  }
  if (!array) array = first_json_value(strip_think(reply), '[', ']');
  if (!array || !array->is_array()) {
    raise(ErrorCode::NoCallsFound, "reply carries no JSON array of tool calls");
  }
  if (array->empty()) raise(ErrorCode::NoCallsFound, "empty call array");

  std::vector<ToolCall> calls;
  for (std::size_t i = 0; i < array->size(); ++i) {
    const auto& item = (*array)[i];
    if (!item.is_object() || !item.contains("tool") || !item["tool"].is_string()) {
      raise(ErrorCode::MalformedCall, "call " + std::to_string(i) + ": missing tool name");
    }
    ToolCall call;
    call.tool = item["tool"].get<std::string>();
    if (item.contains("params")) {
      if (!item["params"].is_object()) {
        raise(ErrorCode::MalformedCall, "call " + std::to_string(i) + ": params must be an object");
      }
      for (const auto& [key, value] : item["params"].items()) {
        if (!value.is_number() && !value.is_string()) {
          raise(ErrorCode::MalformedCall,
                "call " + std::to_string(i) + ": param '" + key + "' must be a scalar");
        }
        call.params[key] = value;
      }
    }
    calls.push_back(std::move(call));
  }
  return calls;
}

std::vector<AnomalyVerdict> parse_detector_verdicts(const std::string& reply) {
  const std::string stripped = strip_think(reply);
  auto array = first_json_value(stripped, '[', ']');
  if (!array || !array->is_array()) {
    raise(ErrorCode::NoJsonArray, "reply carries no JSON array of verdicts");
  }

  std::vector<AnomalyVerdict> verdicts;
  for (std::size_t i = 0; i < array->size(); ++i) {
    const auto& item = (*array)[i];
    const std::string where = "verdict " + std::to_string(i);
    if (!item.is_object()) raise(ErrorCode::FieldMissing, where + ": not an object");
    for (const char* field : {"interval", "type", "explanation", "confidence"}) {
      if (!item.contains(field)) {
        raise(ErrorCode::FieldMissing, where + ": missing '" + std::string(field) + "'");
      }
    }
    const auto& interval = item["interval"];
    if (!interval.is_array() || interval.size() != 2 || !interval[0].is_number_integer() ||
        !interval[1].is_number_integer()) {
      raise(ErrorCode::FieldMissing, where + ": 'interval' must be [start, end]");
    }
    AnomalyVerdict v;
    v.start = interval[0].get<long>();
    v.end = interval[1].get<long>();
    if (v.start > v.end) {
      raise(ErrorCode::FieldMissing, where + ": interval start exceeds end");
    }
    if (!item["type"].is_string() || !item["explanation"].is_string()) {
      raise(ErrorCode::FieldMissing, where + ": 'type' and 'explanation' must be text");
    }
    v.type = item["type"].get<std::string>();
    v.explanation = item["explanation"].get<std::string>();
    if (!item["confidence"].is_number_integer()) {
      raise(ErrorCode::FieldMissing, where + ": 'confidence' must be an integer");
    }
    v.confidence = item["confidence"].get<int>();
    if (v.confidence < 1 || v.confidence > 3) {
      raise(ErrorCode::ConfidenceOutOfRange,
            where + ": confidence " + std::to_string(v.confidence));
    }
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

EvaluatorReport parse_evaluator_report(const std::string& reply) {
  const std::string stripped = strip_think(reply);
  auto object = first_json_value(stripped, '{', '}');
  if (!object || !object->is_object()) {
    raise(ErrorCode::KeyMissing, "reply carries no JSON object");
  }
  for (const char* key : {"issues", "suggestions", "needs_refinement", "quality_metrics"}) {
    if (!object->contains(key)) raise(ErrorCode::KeyMissing, key);
  }

  EvaluatorReport report;
  const auto read_strings = [&](const char* key) {
    const auto& value = (*object)[key];
    if (!value.is_array()) raise(ErrorCode::KeyMissing, std::string(key) + " must be a list");
    std::vector<std::string> out;
    for (const auto& entry : value) {
      if (!entry.is_string()) raise(ErrorCode::KeyMissing, std::string(key) + " must hold text");
      out.push_back(entry.get<std::string>());
    }
    return out;
  };
  report.issues = read_strings("issues");
  report.suggestions = read_strings("suggestions");
  if (!(*object)["needs_refinement"].is_boolean()) {
    raise(ErrorCode::KeyMissing, "needs_refinement must be a boolean");
  }
  report.needs_refinement = (*object)["needs_refinement"].get<bool>();

  const auto& quality = (*object)["quality_metrics"];
  if (!quality.is_object()) raise(ErrorCode::KeyMissing, "quality_metrics must be an object");
  for (const char* key : {"planning", "tool_usage", "reasoning"}) {
    if (!quality.contains(key)) raise(ErrorCode::KeyMissing, std::string("quality_metrics.") + key);
  }
  for (const auto& [key, value] : quality.items()) {
    if (key != "planning" && key != "tool_usage" && key != "reasoning") {
      raise(ErrorCode::BadRating, "unknown quality key '" + key + "'");
    }
    if (!value.is_string()) raise(ErrorCode::BadRating, key + " must be a rating string");
    const auto rating = value.get<std::string>();
    if (rating != "good" && rating != "acceptable" && rating != "poor") {
      raise(ErrorCode::BadRating, key + " = '" + rating + "'");
    }
    report.quality_metrics[key] = rating;
  }
  return report;
}

void to_json(nlohmann::json& j, const AnomalyVerdict& v) {
  j = {{"interval", {v.start, v.end}},
       {"type", v.type},
       {"explanation", v.explanation},
       {"confidence", v.confidence}};
}

void from_json(const nlohmann::json& j, AnomalyVerdict& v) {
  v.start = j.at("interval").at(0).get<long>();
  v.end = j.at("interval").at(1).get<long>();
  v.type = j.at("type").get<std::string>();
  v.explanation = j.at("explanation").get<std::string>();
  v.confidence = j.at("confidence").get<int>();
}

void to_json(nlohmann::json& j, const EvaluatorReport& r) {
  j = {{"issues", r.issues},
       {"suggestions", r.suggestions},
       {"needs_refinement", r.needs_refinement},
       {"quality_metrics", r.quality_metrics}};
}

void from_json(const nlohmann::json& j, EvaluatorReport& r) {
  r.issues = j.at("issues").get<std::vector<std::string>>();
  r.suggestions = j.at("suggestions").get<std::vector<std::string>>();
  r.needs_refinement = j.at("needs_refinement").get<bool>();
  r.quality_metrics = j.at("quality_metrics").get<std::map<std::string, std::string>>();
}

void to_json(nlohmann::json& j, const LocatorPlan& p) {
  j = {{"think", p.think}, {"plan", p.plan}, {"declared_thresholds", p.declared_thresholds}};
}

void from_json(const nlohmann::json& j, LocatorPlan& p) {
  p.think = j.at("think").get<std::string>();
  p.plan = j.at("plan").get<std::string>();
  p.declared_thresholds = j.at("declared_thresholds").get<std::map<std::string, double>>();
}

}  // namespace anomamind
