#include "zoomin/config.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

#include "zoomin/util.hpp"

namespace zoomin::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
}

std::string parse_quoted(std::string_view raw, int line_no) {
  std::string out;
  for (size_t i = 1; i + 1 <= raw.size(); ++i) {
    char c = raw[i];
    if (c == '"') {
      if (i + 1 != raw.size()) fail(line_no, "trailing characters after string");
      return out;
    }
    if (c == '\\') {
      if (i + 1 >= raw.size()) fail(line_no, "dangling escape");
      char e = raw[++i];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        default: fail(line_no, std::string("unsupported escape \\") + e);
      }
    } else {
      out.push_back(c);
    }
  }
  fail(line_no, "unterminated string");
}

TomlValue parse_value(std::string_view raw, int line_no) {
  if (raw.empty()) fail(line_no, "missing value");
  if (raw.front() == '"') return parse_quoted(raw, line_no);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.find_first_of(".eE") == std::string_view::npos) {
    std::int64_t iv = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
    if (ec == std::errc() && ptr == raw.data() + raw.size()) return iv;
  }
  try {
    size_t used = 0;
    double dv = std::stod(std::string(raw), &used);
    if (used == raw.size()) return dv;
  } catch (const std::exception&) {
  }
  fail(line_no, "cannot parse value: " + std::string(raw));
}

// Comments start at an unquoted '#'.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  }
  return true;
}

}  // namespace

TomlTables parse_toml_tables(std::string_view text) {
  TomlTables tables;
  std::string section;
  int line_no = 0;
  for (const std::string& raw_line : util::split(text, '\n')) {
    ++line_no;
    std::string_view line = util::trim(strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated table header");
      auto name = util::trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) fail(line_no, "bad table name");
      section = std::string(name);
      tables[section];  // a header with no keys still declares the table
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    auto key = util::trim(line.substr(0, eq));
    if (!valid_key(key)) fail(line_no, "bad key: " + std::string(key));
    auto value = parse_value(util::trim(line.substr(eq + 1)), line_no);
    tables[section][std::string(key)] = std::move(value);
  }
  return tables;
}

namespace {

template <typename T>
T get_number(const TomlValue& v, const std::string& where) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<T>(*i);
  if (auto* d = std::get_if<double>(&v)) return static_cast<T>(*d);
  throw ConfigError(where + " must be a number");
}

void apply_backend_key(backend::BackendConfig& cfg, const std::string& key,
                       const TomlValue& value) {
  const std::string where = "backend '" + cfg.name + "' key '" + key + "'";
  auto as_string = [&]() -> std::string {
    if (auto* s = std::get_if<std::string>(&value)) return *s;
    throw ConfigError(where + " must be a string");
  };
  if (key == "type")
    cfg.type = as_string();
  else if (key == "base_url")
    cfg.base_url = as_string();
  else if (key == "model")
    cfg.model = as_string();
  else if (key == "api_key_env")
    cfg.api_key_env = as_string();
  else if (key == "script")
    cfg.script_path = as_string();
  else if (key == "timeout_ms")
    cfg.timeout_ms = get_number<int>(value, where);
  else if (key == "max_retries")
    cfg.max_retries = get_number<int>(value, where);
  else if (key == "backoff_initial_ms")
    cfg.backoff_initial_ms = get_number<int>(value, where);
  else if (key == "backoff_max_ms")
    cfg.backoff_max_ms = get_number<int>(value, where);
  else if (key == "max_in_flight")
    cfg.max_in_flight = get_number<int>(value, where);
  else if (key == "temperature")
    cfg.temperature = get_number<double>(value, where);
  else if (key == "max_tokens")
    cfg.max_tokens = get_number<int>(value, where);
  else
    throw ConfigError("unknown " + where);
}

std::map<std::string, backend::BackendConfig> backends_from_toml(std::string_view text) {
  std::map<std::string, backend::BackendConfig> out;
  for (const auto& [section, keys] : parse_toml_tables(text)) {
    constexpr std::string_view prefix = "backends.";
    if (section.rfind(prefix, 0) != 0) {
      if (section == "backends" || section.empty()) continue;
      throw ConfigError("unexpected config table [" + section + "]");
    }
    backend::BackendConfig cfg;
    cfg.name = section.substr(prefix.size());
    if (cfg.name.empty()) throw ConfigError("backend table needs a name");
    for (const auto& [key, value] : keys) apply_backend_key(cfg, key, value);
    out.emplace(cfg.name, std::move(cfg));
  }
  return out;
}

std::map<std::string, backend::BackendConfig> backends_from_json_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("backends") ||
      !j["backends"].is_object())
    throw ConfigError("JSON config must be an object with a \"backends\" object");
  std::map<std::string, backend::BackendConfig> out;
  for (const auto& [name, body] : j["backends"].items()) {
    if (!body.is_object()) throw ConfigError("backend '" + name + "' must be an object");
    backend::BackendConfig cfg;
    cfg.name = name;
    for (const auto& [key, value] : body.items()) {
      TomlValue tv;
      if (value.is_string())
        tv = value.get<std::string>();
      else if (value.is_boolean())
        tv = value.get<bool>();
      else if (value.is_number_integer())
        tv = value.get<std::int64_t>();
      else if (value.is_number())
        tv = value.get<double>();
      else
        throw ConfigError("backend '" + name + "' key '" + key + "' has an unsupported type");
      apply_backend_key(cfg, key, tv);
    }
    out.emplace(cfg.name, std::move(cfg));
  }
  return out;
}

}  // namespace

std::map<std::string, backend::BackendConfig> load_backends(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string lower = util::to_lower_ascii(path);
  if (lower.ends_with(".json")) return backends_from_json_text(text);
  if (lower.ends_with(".toml")) return backends_from_toml(text);
  throw ConfigError("config file must end in .toml or .json: " + path);
}

}  // namespace zoomin::config
