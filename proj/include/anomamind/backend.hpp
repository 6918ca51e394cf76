#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "anomamind/protocol.hpp"

namespace anomamind {

enum class BackendKind { remote, heuristic, replay };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& name);

/// Environment variable holding the API key for remote backends.
inline constexpr const char* kApiKeyEnvVar = "ANOMAMIND_API_KEY";

struct BackendConfig {
  BackendKind kind = BackendKind::heuristic;
  std::string endpoint;  // remote: http(s)://host[:port]/path
  std::string model;     // remote
  double temperature = 0.7;
  std::chrono::milliseconds timeout{30000};
  std::string replay_path;  // replay: JSONL of {digest, reply}
};

/// Throws ConfigError when required fields for the kind are missing.
void validate(const BackendConfig& config);

/// Digest identifying one completion request: temperature plus the ordered
/// (role, content) turns. Timestamps never participate.
std::string request_digest(double temperature, const std::vector<ChatTurn>& messages);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const std::vector<ChatTurn>& messages) = 0;
  virtual double temperature() const = 0;
};

/// Wraps an arbitrary reply function; used for scripted tests and adapters.
class CallbackBackend : public Backend {
 public:
  using Fn = std::function<std::string(const std::vector<ChatTurn>&)>;
  explicit CallbackBackend(Fn fn, double temperature = 0.7)
      : fn_(std::move(fn)), temperature_(temperature) {}
  std::string complete(const std::vector<ChatTurn>& messages) override {
    return fn_(messages);
  }
  double temperature() const override { return temperature_; }

 private:
  Fn fn_;
  double temperature_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// One-shot convenience: builds the backend for the config and completes.
std::string complete(const BackendConfig& config, const std::vector<ChatTurn>& messages);

/// Number of HTTP requests attempted by remote backends since process start;
/// the hermetic test suites assert this stays zero.
std::uint64_t remote_request_count();

/// Appends {digest, reply} lines in the replay fixture format.
void append_replay_fixture(const std::string& path, const std::string& digest,
                           const std::string& reply);

}  // namespace anomamind
