#include <doctest.h>

#include <fstream>

#include "../support/test_support.hpp"
#include "zoomin/config.hpp"

using namespace zoomin::config;

TEST_SUITE("config") {

TEST_CASE("toml subset parsing") {
  const char* text = R"(
# comment line
top_level = "yes"

[backends.qwen]
base_url = "http://localhost:8000/v1"   # trailing comment
model = "qwen-vl"
timeout_ms = 120000
temperature = 0.5
max_retries = 2

[backends.mock]
type = "mock"
script = "fixtures/script.json"
)";
  auto tables = parse_toml_tables(text);
  CHECK(std::get<std::string>(tables.at("").at("top_level")) == "yes");
  auto& qwen = tables.at("backends.qwen");
  CHECK(std::get<std::string>(qwen.at("base_url")) == "http://localhost:8000/v1");
  CHECK(std::get<std::int64_t>(qwen.at("timeout_ms")) == 120000);
  CHECK(std::get<double>(qwen.at("temperature")) == 0.5);
  CHECK(std::get<std::string>(tables.at("backends.mock").at("type")) == "mock");
}

TEST_CASE("toml escapes and errors carry line numbers") {
  auto tables = parse_toml_tables("a = \"quote \\\" backslash \\\\ newline \\n\"");
  CHECK(std::get<std::string>(tables.at("").at("a")) == "quote \" backslash \\ newline \n");

  CHECK_THROWS_WITH_AS(parse_toml_tables("\n\njust some words\n"),
                       doctest::Contains("line 3"), ConfigError);
  CHECK_THROWS_AS(parse_toml_tables("a = \"unterminated"), ConfigError);
  CHECK_THROWS_AS(parse_toml_tables("[unterminated"), ConfigError);
  CHECK_THROWS_AS(parse_toml_tables("a = what"), ConfigError);
}

TEST_CASE("backends load from toml and json") {
  test_support::TempDir dir;
  {
    std::ofstream out(dir.file("zoomin.toml"));
    out << "[backends.qwen]\n"
           "base_url = \"http://localhost:8000/v1\"\n"
           "model = \"qwen-vl\"\n"
           "max_in_flight = 4\n"
           "api_key_env = \"MY_KEY\"\n";
  }
  auto from_toml = load_backends(dir.file("zoomin.toml"));
  REQUIRE(from_toml.count("qwen"));
  CHECK(from_toml.at("qwen").base_url == "http://localhost:8000/v1");
  CHECK(from_toml.at("qwen").model == "qwen-vl");
  CHECK(from_toml.at("qwen").max_in_flight == 4);
  CHECK(from_toml.at("qwen").resolved_api_key_env() == "MY_KEY");

  {
    std::ofstream out(dir.file("zoomin.json"));
    out << R"({"backends": {"gpt": {"base_url": "https://api.example.com/v1",
             "model": "gpt-4o", "temperature": 0.2}}})";
  }
  auto from_json = load_backends(dir.file("zoomin.json"));
  REQUIRE(from_json.count("gpt"));
  CHECK(from_json.at("gpt").base_url == "https://api.example.com/v1");
  CHECK(from_json.at("gpt").temperature == 0.2);
  // default credential env var derives from the backend name
  CHECK(from_json.at("gpt").resolved_api_key_env() == "ZOOMIN_API_KEY_GPT");
}

TEST_CASE("config rejects unknown keys and unreadable files") {
  test_support::TempDir dir;
  {
    std::ofstream out(dir.file("bad.toml"));
    out << "[backends.x]\nbase_url = \"http://h/v1\"\nfrobnicate = 3\n";
  }
  CHECK_THROWS_WITH_AS(load_backends(dir.file("bad.toml")),
                       doctest::Contains("frobnicate"), ConfigError);
  CHECK_THROWS_AS(load_backends(dir.file("missing.toml")), ConfigError);
  CHECK_THROWS_AS(load_backends(dir.file("bad.yaml")), ConfigError);
}

}  // TEST_SUITE
