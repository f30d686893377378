#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zoomin/geometry.hpp"
#include "zoomin/util.hpp"

namespace zoomin::backend {

struct ImagePart {
  std::string media_type = "image/png";
  std::vector<std::uint8_t> bytes;
  // Pixel dimensions, carried for audit logs; not sent on the wire.
  int width = 0;
  int height = 0;
};

struct ContentPart {
  enum class Type { Text, Image };
  Type type = Type::Text;
  std::string text;
  ImagePart image;
};

struct ChatMessage {
  std::string role = "user";
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::string model;  // empty = backend default
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Client-side routing metadata (mock script key, audit logs); never on the wire.
  std::string sample_id;
  int stage = 0;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  double latency_ms = 0.0;
  std::optional<TokenUsage> usage;
  int attempts = 1;
};

struct BackendError : std::runtime_error {
  enum class Kind {
    Timeout,
    Auth,
    Protocol,
    RetriesExhausted,
    ScriptMiss,
    Transport,
    Config,
  };
  Kind kind;
  BackendError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct MissingPlaceholder : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BackendConfig {
  std::string name = "default";
  std::string type = "http";  // "http" | "mock"
  std::string base_url;       // e.g. "http://localhost:8000/v1"
  std::string model;
  std::string api_key_env;  // empty -> ZOOMIN_API_KEY_<NAME>
  int timeout_ms = 120000;
  int max_retries = 3;
  int backoff_initial_ms = 250;
  int backoff_max_ms = 4000;
  int max_in_flight = 16;  // per-backend in-flight cap; <= 0 means unlimited
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string script_path;  // mock backends: scripted completions JSON

  std::string resolved_api_key_env() const;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Issues one chat completion. Never mutates the request.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual const BackendConfig& config() const = 0;
};

struct AttemptLog {
  std::string sample_id;
  int stage = 0;
  int attempts = 1;
  std::vector<int> backoff_ms;  // sleep before each retry
};

/// OpenAI-compatible chat-completions client: POST {base_url}/chat/completions.
/// Retries transport errors and 5xx with exponential backoff.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);
  ChatResponse complete(const ChatRequest& req) override;
  const BackendConfig& config() const override { return cfg_; }
  std::vector<AttemptLog> attempt_log() const;

 private:
  BackendConfig cfg_;
  util::Semaphore sem_;
  mutable std::mutex mu_;
  std::vector<AttemptLog> log_;
};

struct ScriptEntry {
  std::string text;
  int delay_ms = 0;
};

/// Keys are "<sample_id>:<stage>"; "*:<stage>" is a per-stage wildcard.
using MockScript = std::map<std::string, ScriptEntry>;

MockScript mock_script_from_json_text(std::string_view text);
MockScript mock_script_from_file(const std::string& path);

struct MockCall {
  std::string sample_id;
  int stage = 0;
  std::vector<geometry::ImageDims> image_dims;  // per image part, in order
};

/// Deterministic scripted stand-in: returns the scripted text, sleeps the
/// scripted delay and reports exactly that delay as latency.
class MockBackend : public Backend {
 public:
  MockBackend(BackendConfig cfg, MockScript script);
  ChatResponse complete(const ChatRequest& req) override;
  const BackendConfig& config() const override { return cfg_; }

  std::vector<MockCall> call_log() const;
  int call_count(std::string_view sample_id, int stage) const;
  int max_in_flight_observed() const;
  void reset_log();

 private:
  BackendConfig cfg_;
  MockScript script_;
  util::Semaphore sem_;
  mutable std::mutex mu_;
  std::vector<MockCall> log_;
  int in_flight_ = 0;
  int max_in_flight_seen_ = 0;
};

/// Builds an HttpBackend, or a MockBackend loading cfg.script_path.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

struct PromptTemplate {
  std::string name;
  std::string text;  // placeholders: {image}, {crops}, plus text slots like {label_hint}

  /// Placeholder names in textual order ({word} with word in [a-z_]+).
  std::vector<std::string> placeholders() const;
};

struct PromptVars {
  std::map<std::string, std::string> text;
  std::optional<ImagePart> image;   // bound to {image}
  std::vector<ImagePart> crops;     // bound to {crops}, may be empty
};

/// Deterministic substitution into a single user message; image placeholders
/// become image parts in template order. Throws MissingPlaceholder when vars
/// lack a placeholder the template names.
std::vector<ChatMessage> render_prompt(const PromptTemplate& tpl, const PromptVars& vars);

/// OpenAI-schema JSON for a message (image parts as base64 data URLs).
/// Byte-stable; used for both the wire body and determinism checks.
std::string messages_to_wire_json(const std::vector<ChatMessage>& messages);

}  // namespace zoomin::backend
