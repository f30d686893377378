#include "zoomin/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace zoomin::backend {

using nlohmann::json;

std::string BackendConfig::resolved_api_key_env() const {
  if (!api_key_env.empty()) return api_key_env;
  std::string env = "ZOOMIN_API_KEY_";
  for (char c : name) env.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return env;
}

// ---- prompt templating ----

namespace {

bool placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Segments of a template: literal text and placeholder names.
struct Segment {
  bool is_placeholder = false;
  std::string value;
};

std::vector<Segment> split_template(std::string_view text) {
  std::vector<Segment> segs;
  std::string literal;
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      size_t j = i + 1;
      while (j < text.size() && placeholder_char(text[j])) ++j;
      if (j > i + 1 && j < text.size() && text[j] == '}') {
        if (!literal.empty()) {
          segs.push_back({false, std::move(literal)});
          literal.clear();
        }
        segs.push_back({true, std::string(text.substr(i + 1, j - i - 1))});
        i = j + 1;
        continue;
      }
    }
    literal.push_back(text[i]);
    ++i;
  }
  if (!literal.empty()) segs.push_back({false, std::move(literal)});
  return segs;
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  for (const auto& seg : split_template(text))
    if (seg.is_placeholder) names.push_back(seg.value);
  return names;
}

std::vector<ChatMessage> render_prompt(const PromptTemplate& tpl, const PromptVars& vars) {
  ChatMessage msg;
  msg.role = "user";
  std::string pending_text;
  auto flush_text = [&] {
    if (pending_text.empty()) return;
    ContentPart part;
    part.type = ContentPart::Type::Text;
    part.text = std::move(pending_text);
    msg.parts.push_back(std::move(part));
    pending_text.clear();
  };

  for (const auto& seg : split_template(tpl.text)) {
    if (!seg.is_placeholder) {
      pending_text += seg.value;
      continue;
    }
    if (seg.value == "image") {
      if (!vars.image)
        throw MissingPlaceholder("template '" + tpl.name + "' needs {image}");
      flush_text();
      ContentPart part;
      part.type = ContentPart::Type::Image;
      part.image = *vars.image;
      msg.parts.push_back(std::move(part));
    } else if (seg.value == "crops") {
      flush_text();
      for (const auto& crop_part : vars.crops) {
        ContentPart part;
        part.type = ContentPart::Type::Image;
        part.image = crop_part;
        msg.parts.push_back(std::move(part));
      }
    } else {
      auto it = vars.text.find(seg.value);
      if (it == vars.text.end())
        throw MissingPlaceholder("template '" + tpl.name + "' needs {" + seg.value + "}");
      pending_text += it->second;
    }
  }
  flush_text();
  return {std::move(msg)};
}

std::string messages_to_wire_json(const std::vector<ChatMessage>& messages) {
  json arr = json::array();
  for (const auto& m : messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.type == ContentPart::Type::Text) {
        content.push_back({{"type", "text"}, {"text", p.text}});
      } else {
        std::string url = "data:" + p.image.media_type + ";base64," +
                          util::base64_encode(p.image.bytes.data(), p.image.bytes.size());
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
    }
    arr.push_back({{"role", m.role}, {"content", content}});
  }
  return arr.dump();
}

// ---- HTTP backend ----

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix, no trailing slash
};

ParsedUrl parse_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw BackendError(BackendError::Kind::Config, "base_url needs a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.prefix = base_url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg)
    : cfg_(std::move(cfg)), sem_(cfg_.max_in_flight) {
  if (cfg_.base_url.empty())
    throw BackendError(BackendError::Kind::Config,
                       "backend '" + cfg_.name + "' has no base_url");
  parse_base_url(cfg_.base_url);  // fail fast on malformed URLs
}

std::vector<AttemptLog> HttpBackend::attempt_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
  util::SemaphoreTicket ticket(sem_);
  const ParsedUrl url = parse_base_url(cfg_.base_url);
  const std::string path = url.prefix + "/chat/completions";

  json body;
  body["model"] = req.model.empty() ? cfg_.model : req.model;
  body["messages"] = json::parse(messages_to_wire_json(req.messages));
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  const std::string payload = body.dump();

  httplib::Headers headers;
  const char* key = std::getenv(cfg_.resolved_api_key_env().c_str());
  if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

  const int max_attempts = std::max(1, cfg_.max_retries + 1);
  AttemptLog log_entry{req.sample_id, req.stage, 0, {}};
  std::string last_error = "unknown";
  auto last_kind = BackendError::Kind::Transport;
  const auto t0 = std::chrono::steady_clock::now();

  auto finish_log = [&] {
    std::lock_guard lock(mu_);
    log_.push_back(log_entry);
  };

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) {
      int backoff = cfg_.backoff_initial_ms;
      for (int i = 2; i < attempt; ++i) backoff *= 2;
      backoff = std::min(backoff, cfg_.backoff_max_ms);
      log_entry.backoff_ms.push_back(backoff);
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    log_entry.attempts = attempt;

    httplib::Client cli(url.origin);
    cli.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    cli.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    cli.set_write_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      auto err = res.error();
      last_error = "transport error: " + httplib::to_string(err);
      last_kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                   err == httplib::Error::Write)
                      ? BackendError::Kind::Timeout
                      : BackendError::Kind::Transport;
      continue;  // transient
    }
    if (res->status == 401 || res->status == 403) {
      finish_log();
      throw BackendError(BackendError::Kind::Auth,
                         "backend '" + cfg_.name + "' auth failed (HTTP " +
                             std::to_string(res->status) + ")");
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      last_kind = BackendError::Kind::Transport;
      continue;  // transient
    }
    if (res->status != 200) {
      finish_log();
      throw BackendError(BackendError::Kind::Protocol,
                         "backend '" + cfg_.name + "' HTTP " + std::to_string(res->status) +
                             ": " + res->body.substr(0, 200));
    }

    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content")) {
      finish_log();
      throw BackendError(BackendError::Kind::Protocol,
                         "backend '" + cfg_.name + "' returned a non-conforming body");
    }

    ChatResponse out;
    const auto& content = parsed["choices"][0]["message"]["content"];
    out.text = content.is_string() ? content.get<std::string>() : content.dump();
    out.attempts = attempt;
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
      TokenUsage usage;
      usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
      usage.completion_tokens = parsed["usage"].value("completion_tokens", 0);
      out.usage = usage;
    }
    out.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    finish_log();
    return out;
  }

  finish_log();
  if (max_attempts == 1) throw BackendError(last_kind, last_error);
  throw BackendError(BackendError::Kind::RetriesExhausted,
                     "backend '" + cfg_.name + "': " + std::to_string(max_attempts) +
                         " attempts failed, last: " + last_error);
}

// ---- mock backend ----

MockScript mock_script_from_json_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw BackendError(BackendError::Kind::Config, "mock script must be a JSON object");
  MockScript script;
  for (const auto& [key, value] : j.items()) {
    ScriptEntry entry;
    if (value.is_string()) {
      entry.text = value.get<std::string>();
    } else if (value.is_object() && value.contains("text") && value["text"].is_string()) {
      entry.text = value["text"].get<std::string>();
      entry.delay_ms = value.value("delay_ms", 0);
    } else {
      throw BackendError(BackendError::Kind::Config,
                         "mock script entry '" + key + "' must be a string or {text, delay_ms}");
    }
    script.emplace(key, std::move(entry));
  }
  return script;
}

MockScript mock_script_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw BackendError(BackendError::Kind::Config, "cannot open mock script: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return mock_script_from_json_text(text);
}

MockBackend::MockBackend(BackendConfig cfg, MockScript script)
    : cfg_(std::move(cfg)), script_(std::move(script)), sem_(cfg_.max_in_flight) {}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  util::SemaphoreTicket ticket(sem_);
  const std::string key = req.sample_id + ":" + std::to_string(req.stage);
  auto it = script_.find(key);
  if (it == script_.end()) it = script_.find("*:" + std::to_string(req.stage));
  if (it == script_.end())
    throw BackendError(BackendError::Kind::ScriptMiss, "mock script has no entry for " + key);

  {
    std::lock_guard lock(mu_);
    MockCall call{req.sample_id, req.stage, {}};
    for (const auto& m : req.messages)
      for (const auto& p : m.parts)
        if (p.type == ContentPart::Type::Image)
          call.image_dims.push_back({p.image.width, p.image.height});
    log_.push_back(std::move(call));
    ++in_flight_;
    max_in_flight_seen_ = std::max(max_in_flight_seen_, in_flight_);
  }

  if (it->second.delay_ms > 0)
    std::this_thread::sleep_for(std::chrono::milliseconds(it->second.delay_ms));

  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }

  ChatResponse out;
  out.text = it->second.text;
  // Scripted latency keeps replayed runs bit-reproducible.
  out.latency_ms = static_cast<double>(it->second.delay_ms);
  out.attempts = 1;
  return out;
}

std::vector<MockCall> MockBackend::call_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

int MockBackend::call_count(std::string_view sample_id, int stage) const {
  std::lock_guard lock(mu_);
  int n = 0;
  for (const auto& c : log_)
    if (c.sample_id == sample_id && c.stage == stage) ++n;
  return n;
}

int MockBackend::max_in_flight_observed() const {
  std::lock_guard lock(mu_);
  return max_in_flight_seen_;
}

void MockBackend::reset_log() {
  std::lock_guard lock(mu_);
  log_.clear();
  max_in_flight_seen_ = 0;
  in_flight_ = 0;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.type == "mock") {
    if (cfg.script_path.empty())
      throw BackendError(BackendError::Kind::Config,
                         "mock backend '" + cfg.name + "' needs a script path");
    return std::make_unique<MockBackend>(cfg, mock_script_from_file(cfg.script_path));
  }
  if (cfg.type == "http") return std::make_unique<HttpBackend>(cfg);
  throw BackendError(BackendError::Kind::Config,
                     "unknown backend type '" + cfg.type + "' for '" + cfg.name + "'");
}

}  // namespace zoomin::backend
