#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "psfnet/cascade.hpp"
#include "psfnet/sampling.hpp"
#include "psfnet/training.hpp"

namespace psfnet {

// Strict scalar parsers; `what` names the value in error messages.
std::uint64_t parse_uint(std::string_view s, std::string_view what);
double parse_double(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);
// Shortest text that parses back to the same double ("inf" for infinity).
std::string format_double(double v);

enum class ValueKind { kUint, kDouble, kBool, kChoice, kList };

struct ConfigKey {
  std::string section;
  std::string key;
  ValueKind kind;
  std::string default_value;
  std::vector<std::string> choices;  // kChoice: allowed values; kList: allowed items
  std::string help;
};

// Every accepted key with its default.
const std::vector<ConfigKey>& config_schema();

// Sectioned key=value configuration:
//
//   [train]
//   epochs = 200   # comment
//
// Keys outside the schema, malformed lines and values of the wrong kind are
// rejected with ConfigError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::string& get(const std::string& section, const std::string& key) const;
  std::uint64_t get_uint(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;

  // Applies --seed to every seed key.
  void override_seed(std::uint64_t seed);

  TrainConfig train_config() const;

  // Canonical text with every key, in schema order.
  std::string to_string() const;

 private:
  std::map<std::pair<std::string, std::string>, std::string> values_;
};

}  // namespace psfnet
