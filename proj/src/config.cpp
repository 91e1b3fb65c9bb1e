#include "psfnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace psfnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(std::string(what) + ": expected a non-negative integer, got '" +
                      std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + ": expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(std::string(what) + ": expected true|false, got '" + std::string(s) + "'");
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

const std::vector<ConfigKey>& config_schema() {
  using K = ValueKind;
  static const std::vector<ConfigKey> schema = {
      {"simulate", "n_scans", K::kUint, "13", {}, "number of scans"},
      {"simulate", "height", K::kUint, "64", {}, "image rows"},
      {"simulate", "width", K::kUint, "64", {}, "image columns"},
      {"simulate", "coils", K::kUint, "4", {}, "receive coils"},
      {"simulate", "phantom", K::kChoice, "random", {"random", "shepp_logan"}, "anatomy generator"},
      {"simulate", "noise_sigma", K::kDouble, "0", {}, "k-space noise std per component"},
      {"simulate", "seed", K::kUint, "0", {}, "base seed for anatomy, coils and noise"},
      {"mask", "accel", K::kDouble, "4", {}, "target acceleration R"},
      {"mask", "pattern", K::kChoice, "variable", {"variable", "uniform"}, "sampling density"},
      {"mask", "calib", K::kUint, "16", {}, "calibration window side"},
      {"mask", "split", K::kBool, "false", {}, "add a self-supervision split"},
      {"mask", "loss_frac", K::kDouble, "0.4", {}, "fraction of non-calibration samples for the loss"},
      {"mask", "seed", K::kUint, "0", {}, "base mask seed"},
      {"model", "kind", K::kChoice, "psfnet", {"psfnet", "modl", "psfnet_serial"}, "network"},
      {"model", "cascades", K::kUint, "5", {}, "unrolled cascades K"},
      {"model", "channels", K::kUint, "16", {}, "SG block channels C"},
      {"model", "kernel_size", K::kUint, "9", {}, "SS kernel width w"},
      {"model", "kappa", K::kDouble, "0.01", {}, "SS kernel Tikhonov weight"},
      {"model", "spirit_iters", K::kUint, "13", {}, "SPIRiT iterations"},
      {"model", "final_dc", K::kBool, "false", {}, "strict DC after the last cascade"},
      {"train", "mode", K::kChoice, "supervised", {"supervised", "selfsup"}, "training signal"},
      {"train", "epochs", K::kUint, "200", {}, "epochs"},
      {"train", "batch_size", K::kUint, "2", {}, "scans per step"},
      {"train", "lr", K::kDouble, "0.0001", {}, "Adam learning rate"},
      {"train", "beta1", K::kDouble, "0.9", {}, "Adam beta1"},
      {"train", "beta2", K::kDouble, "0.99", {}, "Adam beta2"},
      {"train", "adam_eps", K::kDouble, "1e-08", {}, "Adam epsilon"},
      {"train", "normalize", K::kBool, "true", {}, "per-scan intensity normalization"},
      {"train", "seed", K::kUint, "0", {}, "initialization and shuffling seed"},
      {"eval",
       "methods",
       K::kList,
       "zf,spirit,psfnet",
       {"zf", "spirit", "modl", "psfnet", "psfnet_serial"},
       "methods to evaluate"},
  };
  return schema;
}

namespace {

const ConfigKey& find_key(const std::string& section, const std::string& key) {
  const auto& schema = config_schema();
  const auto it = std::find_if(schema.begin(), schema.end(), [&](const ConfigKey& k) {
    return k.section == section && k.key == key;
  });
  if (it == schema.end()) {
    throw ConfigError("unknown config key '" + key + "' in section [" + section + "]");
  }
  return *it;
}

void check_value(const ConfigKey& k, const std::string& value) {
  const std::string what = "[" + k.section + "] " + k.key;
  switch (k.kind) {
    case ValueKind::kUint: parse_uint(value, what); break;
    case ValueKind::kDouble: parse_double(value, what); break;
    case ValueKind::kBool: parse_bool(value, what); break;
    case ValueKind::kChoice:
      if (std::find(k.choices.begin(), k.choices.end(), value) == k.choices.end()) {
        throw ConfigError(what + ": invalid value '" + value + "'");
      }
      break;
    case ValueKind::kList: {
      std::stringstream ss(value);
      std::string item;
      std::size_t n = 0;
      while (std::getline(ss, item, ',')) {
        const std::string t(trim(item));
        if (t.empty()) continue;
        if (std::find(k.choices.begin(), k.choices.end(), t) == k.choices.end()) {
          throw ConfigError(what + ": invalid item '" + t + "'");
        }
        ++n;
      }
      if (n == 0) throw ConfigError(what + ": empty list");
      break;
    }
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const ConfigKey& k : config_schema()) values_[{k.section, k.key}] = k.default_value;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const ConfigKey& k = find_key(section, key);
  const std::string v(trim(value));
  check_value(k, v);
  values_[{section, key}] = v;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const auto& schema = config_schema();
      if (std::none_of(schema.begin(), schema.end(),
                       [&](const ConfigKey& k) { return k.section == section; })) {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    try {
      cfg.set(section, std::string(trim(line.substr(0, eq))), std::string(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

const std::string& RunConfig::get(const std::string& section, const std::string& key) const {
  find_key(section, key);
  return values_.at({section, key});
}

std::uint64_t RunConfig::get_uint(const std::string& section, const std::string& key) const {
  return parse_uint(get(section, key), key);
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
  return parse_double(get(section, key), key);
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
  return parse_bool(get(section, key), key);
}

std::vector<std::string> RunConfig::get_list(const std::string& section,
                                             const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(section, key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t(trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void RunConfig::override_seed(std::uint64_t seed) {
  for (const ConfigKey& k : config_schema()) {
    if (k.key == "seed") values_[{k.section, k.key}] = std::to_string(seed);
  }
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.mode = parse_train_mode(get("train", "mode"));
  c.model = parse_model_kind(get("model", "kind"));
  c.epochs = get_uint("train", "epochs");
  c.batch_size = get_uint("train", "batch_size");
  c.lr = get_double("train", "lr");
  c.beta1 = get_double("train", "beta1");
  c.beta2 = get_double("train", "beta2");
  c.adam_eps = get_double("train", "adam_eps");
  c.seed = get_uint("train", "seed");
  c.cascades = get_uint("model", "cascades");
  c.channels = get_uint("model", "channels");
  c.kernel_size = get_uint("model", "kernel_size");
  c.kappa = get_double("model", "kappa");
  c.loss_frac = get_double("mask", "loss_frac");
  c.normalize = get_bool("train", "normalize");
  c.final_dc = get_bool("model", "final_dc");
  c.validate();
  return c;
}

std::string RunConfig::to_string() const {
  std::string out;
  std::string section;
  for (const ConfigKey& k : config_schema()) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.key + " = " + values_.at({k.section, k.key}) + "\n";
  }
  return out;
}

}  // namespace psfnet
