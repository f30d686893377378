#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "zoomin/backend.hpp"

namespace zoomin::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using TomlValue = std::variant<std::string, std::int64_t, double, bool>;
/// section path -> key -> value. Flat-table TOML subset: [a.b] headers,
/// key = "string" | integer | float | true/false, # comments.
using TomlTables = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTables parse_toml_tables(std::string_view text);

/// Named backends from a zoomin.toml or .json config file (by extension).
std::map<std::string, backend::BackendConfig> load_backends(const std::string& path);

}  // namespace zoomin::config
