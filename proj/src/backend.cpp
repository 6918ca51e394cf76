#include "anomamind/backend.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <httplib.h>

namespace anomamind {

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::remote: return "remote";
    case BackendKind::heuristic: return "heuristic";
    case BackendKind::replay: return "replay";
  }
  return "heuristic";
}

BackendKind backend_kind_from_string(const std::string& name) {
  if (name == "remote") return BackendKind::remote;
  if (name == "heuristic") return BackendKind::heuristic;
  if (name == "replay") return BackendKind::replay;
  raise(ErrorCode::ConfigError, "unknown backend kind '" + name + "'");
}

void validate(const BackendConfig& config) {
  if (config.temperature < 0.0 || config.temperature > 2.0) {
    raise(ErrorCode::ConfigError, "temperature must be in [0, 2]");
  }
  if (config.kind == BackendKind::remote && (config.endpoint.empty() || config.model.empty())) {
    raise(ErrorCode::ConfigError, "remote backend needs endpoint and model");
  }
  if (config.kind == BackendKind::replay && config.replay_path.empty()) {
    raise(ErrorCode::ConfigError, "replay backend needs replay_path");
  }
}

std::string request_digest(double temperature, const std::vector<ChatTurn>& messages) {
  char head[32];
  std::snprintf(head, sizeof(head), "t=%.4f;", temperature);
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const std::string& text) {
    for (unsigned char byte : text) {
      h ^= byte;
      h *= 1099511628211ULL;
    }
  };
  mix(head);
  for (const auto& turn : messages) {
    mix(to_string(turn.role));
    mix("\n");
    mix(turn.content);
    mix("\x1e");
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016" PRIx64, h);
  return out;
}

namespace {

std::atomic<std::uint64_t> g_remote_requests{0};

// ---------------------------------------------------------------------------
// Heuristic backend: the hermetic stand-in for the LLM roles. It keys off
// markers in the default prompt templates; with heavily customized templates
// it degrades to empty candidate handling.
// ---------------------------------------------------------------------------

std::optional<nlohmann::json> json_after_marker(const std::string& text,
                                                const std::string& marker, char open,
                                                char close) {
  const auto at = text.find(marker);
  if (at == std::string::npos) return std::nullopt;
  const auto start = text.find(open, at + marker.size());
  if (start == std::string::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t j = start; j < text.size(); ++j) {
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
      if (--depth == 0) {
        auto parsed = nlohmann::json::parse(text.substr(start, j - start + 1), nullptr, false);
        if (parsed.is_discarded()) return std::nullopt;
        return parsed;
      }
    }
  }
  return std::nullopt;
}

long window_start_of(const std::string& text) {
  const auto at = text.find("Window range: [");
  if (at == std::string::npos) return 0;
  return std::strtol(text.c_str() + at + 15, nullptr, 10);
}

int iteration_of(const std::string& text) {
  const auto at = text.rfind("Iteration: ");
  if (at == std::string::npos) return 1;
  return static_cast<int>(std::strtol(text.c_str() + at + 11, nullptr, 10));
}

struct HeuristicCandidate {
  long start = 0;
  long end = 0;
};

std::vector<HeuristicCandidate> candidates_of(const nlohmann::json& array) {
  std::vector<HeuristicCandidate> out;
  if (!array.is_array()) return out;
  for (const auto& item : array) {
    if (item.is_object() && item.contains("start") && item.contains("end")) {
      out.push_back({item["start"].get<long>(), item["end"].get<long>()});
    }
  }
  return out;
}

std::string heuristic_locator(const std::string& user) {
  auto candidates = json_after_marker(user, "Candidate intervals:", '[', ']');
  const std::string cand_text = candidates ? candidates->dump() : "[]";
  const auto at = user.find("Window range: ");
  std::string range = "[0, 0)";
  if (at != std::string::npos) {
    const auto eol = user.find('\n', at);
    range = user.substr(at + 14, eol - at - 14);
  }
  std::ostringstream reply;
  reply << "<think>Fixed verification recipe: standardized differences over the whole "
           "window, summary statistics, and a context comparison per candidate.</think>\n"
        << "<Plan>For the window spanning " << range
        << ", run diff_zscore scope=global with diff_zscore >= 3.0, run stat_features, "
           "and run local_structure over each candidate. Disregard differences below "
           "the threshold. Candidates: "
        << cand_text << "</Plan>";
  return reply.str();
}

std::string heuristic_actor(const std::string& user) {
  auto cand_json = json_after_marker(user, "Candidates:", '[', ']');
  const auto candidates = candidates_of(cand_json.value_or(nlohmann::json::array()));

  nlohmann::json calls = nlohmann::json::array();
  calls.push_back({{"tool", "diff_zscore"},
                   {"params", {{"scope", "global"}, {"threshold", 3.0}}}});
  calls.push_back({{"tool", "stat_features"}, {"params", nlohmann::json::object()}});
  for (const auto& c : candidates) {
    calls.push_back(
        {{"tool", "local_structure"}, {"params", {{"start", c.start}, {"end", c.end}}}});
  }
  return "```json\n" + calls.dump() + "\n```";
}

struct ZScoreEvidence {
  std::map<long, double> z_by_index;  // outlier diff index -> z
  double threshold = 3.0;
};

std::string heuristic_detector(const std::string& user) {
  const auto plan_at = user.find("Plan:");
  auto cand_json = plan_at == std::string::npos
                       ? std::nullopt
                       : json_after_marker(user.substr(plan_at), "Candidates:", '[', ']');
  const auto candidates = candidates_of(cand_json.value_or(nlohmann::json::array()));
  auto tools = json_after_marker(user, "Tool results:", '[', ']');
  const long window_start = window_start_of(user);

  ZScoreEvidence zscore;
  std::map<std::pair<long, long>, double> context_dev;   // interval -> deviation
  std::map<std::pair<long, long>, double> local_slope;
  bool periodic = false;

  if (tools && tools->is_array()) {
    for (const auto& entry : *tools) {
      if (!entry.is_object() || !entry.contains("tool")) continue;
      const auto tool = entry["tool"].get<std::string>();
      const auto& payload = entry.contains("payload") ? entry["payload"] : nlohmann::json();
      if (tool == "diff_zscore" && payload.is_object()) {
        zscore.threshold = payload.value("threshold", 3.0);
        std::map<long, double> all_z;
        for (const auto& p : payload.value("scores", nlohmann::json::array())) {
          all_z[p.value("index", 0L)] = p.value("z", 0.0);
        }
        for (const auto& idx : payload.value("outlier_indices", nlohmann::json::array())) {
          const long i = idx.get<long>();
          zscore.z_by_index[i] = all_z.count(i) ? all_z[i] : 0.0;
        }
      } else if (tool == "local_structure" && payload.is_object()) {
        // The analyzed interval is carried in the summary prefix
        // "local_structure[start, end)".
        long s = 0;
        long e = 0;
        const auto summary = entry.value("summary", std::string());
        if (std::sscanf(summary.c_str(), "local_structure[%ld, %ld)", &s, &e) == 2) {
          double deviation = 0.0;
          if (payload.contains("context_deviation")) {
            const auto& cd = payload["context_deviation"];
            deviation = cd.is_string() ? std::numeric_limits<double>::infinity()
                                       : cd.get<double>();
          }
          context_dev[{s, e}] = deviation;
          local_slope[{s, e}] = payload.value("trend_slope", 0.0);
        }
      } else if (tool == "global_structure" && payload.is_object()) {
        periodic = payload.contains("dominant_period");
      }
    }
  }

  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& c : candidates) {
    // Outlier diffs touching the candidate: diff i covers points i and i+1.
    std::vector<std::pair<long, double>> in_span;
    for (const auto& [idx, z] : zscore.z_by_index) {
      if (idx >= c.start - 1 && idx <= c.end - 1) in_span.emplace_back(idx, z);
    }

    // Narrow to the changed points. Adjacent opposite-sign outlier diffs
    // bracket a single spike; leftover opposite-sign jump pairs bracket a
    // level-shifted run; a lone jump marks the point on its elevated side.
    std::vector<long> points;
    std::vector<bool> consumed(in_span.size(), false);
    for (std::size_t k = 0; k + 1 < in_span.size(); ++k) {
      if (consumed[k] || consumed[k + 1]) continue;
      if (in_span[k + 1].first == in_span[k].first + 1 &&
          in_span[k].second * in_span[k + 1].second < 0.0) {
        points.push_back(in_span[k].first + 1);
        consumed[k] = consumed[k + 1] = true;
      }
    }
    std::vector<std::pair<long, double>> leftovers;
    for (std::size_t k = 0; k < in_span.size(); ++k) {
      if (!consumed[k]) leftovers.push_back(in_span[k]);
    }
    for (std::size_t k = 0; k < leftovers.size();) {
      if (k + 1 < leftovers.size() && leftovers[k].second * leftovers[k + 1].second < 0.0) {
        points.push_back(leftovers[k].first + 1);
        points.push_back(leftovers[k + 1].first);
        k += 2;
      } else {
        points.push_back(leftovers[k].second > 0.0 ? leftovers[k].first + 1
                                                   : leftovers[k].first);
        k += 1;
      }
    }
    for (long& p : points) p = std::min(std::max(p, c.start), c.end - 1);

    const auto dev_it = context_dev.find({c.start, c.end});
    const double deviation = dev_it == context_dev.end() ? 0.0 : dev_it->second;
    const bool z_support = !points.empty();
    const bool ctx_support = deviation >= 3.0;
    if (!z_support && !ctx_support) continue;

    long lo = c.start;
    long hi = c.end - 1;
    if (z_support) {
      lo = *std::min_element(points.begin(), points.end());
      hi = *std::max_element(points.begin(), points.end());
    }

    std::string type = "pattern_contextual";
    const auto slope_it = local_slope.find({c.start, c.end});
    const double slope = slope_it == local_slope.end() ? 0.0 : slope_it->second;
    if (lo == hi) {
      type = "point_global";
    } else if (periodic) {
      type = "pattern_seasonal";
    } else if (std::fabs(slope) >= 0.05) {
      type = "pattern_trend";
    }

    std::ostringstream why;
    if (z_support) {
      why << "diff_zscore flags " << points.size() << " point(s) at |z| >= "
          << zscore.threshold << " inside [" << c.start << ", " << c.end << ")";
    }
    if (ctx_support) {
      if (z_support) why << "; ";
      why << "local_structure context deviation "
          << (std::isinf(deviation) ? std::string("inf") : std::to_string(deviation))
          << " >= 3";
    }

    verdicts.push_back({{"interval", {window_start + lo, window_start + hi}},
                        {"type", type},
                        {"explanation", why.str()},
                        {"confidence", std::min(3, 1 + (z_support ? 1 : 0) + (ctx_support ? 1 : 0))}});
  }

  return "<think>Candidates confirmed only where the numeric evidence clears the "
         "declared thresholds.</think>\n" +
         verdicts.dump();
}

std::string heuristic_evaluator(const std::string& user) {
  auto verdicts = json_after_marker(user, "Detection result:", '[', ']');
  const int iteration = iteration_of(user);

  std::vector<std::string> issues;
  if (verdicts && verdicts->is_array()) {
    for (std::size_t i = 0; i < verdicts->size(); ++i) {
      const auto& v = (*verdicts)[i];
      const std::string why = v.is_object() ? v.value("explanation", std::string()) : "";
      bool cites_tool = false;
      for (const auto& tool : registered_tools()) {
        if (why.find(tool) != std::string::npos) {
          cites_tool = true;
          break;
        }
      }
      if (!cites_tool) {
        issues.push_back("finding " + std::to_string(i) + " cites no tool evidence");
      }
    }
  }

  nlohmann::json reply = {
      {"issues", issues},
      {"suggestions",
       issues.empty() ? nlohmann::json::array()
                      : nlohmann::json::array(
                            {"gather tool evidence overlapping each flagged interval"})},
      {"needs_refinement", iteration <= 1 && !issues.empty()},
      {"quality_metrics",
       {{"planning", "good"},
        {"tool_usage", issues.empty() ? "good" : "acceptable"},
        {"reasoning", issues.empty() ? "good" : "poor"}}}};
  return reply.dump();
}

class HeuristicBackend : public Backend {
 public:
  explicit HeuristicBackend(double temperature) : temperature_(temperature) {}

  std::string complete(const std::vector<ChatTurn>& messages) override {
    std::string role;
    std::string user;
    for (const auto& turn : messages) {
      if (turn.role == ChatRole::system) {
        const auto at = turn.content.find("role: ");
        if (at != std::string::npos) role = turn.content.substr(at + 6);
      } else if (turn.role == ChatRole::user) {
        user = turn.content;
      }
    }
    if (role == "locator") return heuristic_locator(user);
    if (role == "actor") return heuristic_actor(user);
    if (role == "detector") return heuristic_detector(user);
    if (role == "evaluator") return heuristic_evaluator(user);
    if (role == "perception") {
      // No visual model at hand; an unparseable reply makes the caller fall
      // back to the deterministic saliency proxy.
      return "no perception model available";
    }
    raise(ErrorCode::ConfigError, "heuristic backend got unknown role '" + role + "'");
  }

  double temperature() const override { return temperature_; }

 private:
  double temperature_;
};

// ---------------------------------------------------------------------------
// Replay backend
// ---------------------------------------------------------------------------

class ReplayBackend : public Backend {
 public:
  ReplayBackend(const std::string& path, double temperature) : temperature_(temperature) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::FileMissing, path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("digest") || !j.contains("reply")) {
        raise(ErrorCode::ParseError,
              path + " line " + std::to_string(line_no) + ": expected {digest, reply}");
      }
      fixtures_[j["digest"].get<std::string>()].push_back(j["reply"].get<std::string>());
    }
  }

  std::string complete(const std::vector<ChatTurn>& messages) override {
    const std::string digest = request_digest(temperature_, messages);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = fixtures_.find(digest);
    if (it == fixtures_.end() || it->second.empty()) {
      raise(ErrorCode::ReplayMiss, digest);
    }
    // Replies for one digest are consumed in order; the last one sticks so
    // identical requests across windows keep replaying.
    if (it->second.size() > 1) {
      std::string reply = it->second.front();
      it->second.pop_front();
      return reply;
    }
    return it->second.front();
  }

  double temperature() const override { return temperature_; }

 private:
  std::map<std::string, std::deque<std::string>> fixtures_;
  std::mutex mutex_;
  double temperature_;
};

// ---------------------------------------------------------------------------
// Remote backend (chat-completions wire shape)
// ---------------------------------------------------------------------------

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(const BackendConfig& config) : config_(config) {
    const char* key = std::getenv(kApiKeyEnvVar);
    if (key == nullptr || *key == '\0') {
      raise(ErrorCode::BackendUnavailable,
            std::string(kApiKeyEnvVar) + " is not set for the remote backend");
    }
    api_key_ = key;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config_.endpoint.rfind("https://", 0) == 0) {
      raise(ErrorCode::ConfigError, "built without TLS; use an http endpoint");
    }
#endif
  }

  std::string complete(const std::vector<ChatTurn>& messages) override {
    g_remote_requests.fetch_add(1, std::memory_order_relaxed);

    std::string base = config_.endpoint;
    std::string path = "/";
    const auto scheme = base.find("://");
    const auto slash = scheme == std::string::npos ? base.find('/')
                                                   : base.find('/', scheme + 3);
    if (slash != std::string::npos) {
      path = base.substr(slash);
      base = base.substr(0, slash);
    }

    nlohmann::json body = {{"model", config_.model},
                           {"temperature", config_.temperature},
                           {"messages", nlohmann::json::array()}};
    for (const auto& turn : messages) {
      body["messages"].push_back({{"role", to_string(turn.role)}, {"content", turn.content}});
    }

    httplib::Client client(base);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);
    client.set_read_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
          err == httplib::Error::Write) {
        raise(ErrorCode::Timeout, httplib::to_string(err));
      }
      raise(ErrorCode::HttpError, httplib::to_string(err));
    }
    if (result->status < 200 || result->status >= 300) {
      raise(ErrorCode::HttpError, "status " + std::to_string(result->status));
    }
    auto parsed = nlohmann::json::parse(result->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
      raise(ErrorCode::HttpError, "malformed completion response");
    }
    return parsed["choices"][0]["message"]["content"].get<std::string>();
  }

  double temperature() const override { return config_.temperature; }

 private:
  BackendConfig config_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  validate(config);
  switch (config.kind) {
    case BackendKind::heuristic:
      return std::make_unique<HeuristicBackend>(config.temperature);
    case BackendKind::replay:
      return std::make_unique<ReplayBackend>(config.replay_path, config.temperature);
    case BackendKind::remote:
      return std::make_unique<RemoteBackend>(config);
  }
  raise(ErrorCode::ConfigError, "unreachable backend kind");
}

std::string complete(const BackendConfig& config, const std::vector<ChatTurn>& messages) {
  return make_backend(config)->complete(messages);
}

std::uint64_t remote_request_count() {
  return g_remote_requests.load(std::memory_order_relaxed);
}

void append_replay_fixture(const std::string& path, const std::string& digest,
                           const std::string& reply) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) raise(ErrorCode::FileMissing, "cannot open for append: " + path);
  nlohmann::json line = {{"digest", digest}, {"reply", reply}};
  out << line.dump() << '\n';
}

}  // namespace anomamind
