#include "polariton/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "polariton/error.hpp"

namespace polariton {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) {
    std::ostringstream out;
    out.precision(17);
    out << v.get<double>();
    return out.str();
  }
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& e : v) {
      if (!joined.empty()) joined += ',';
      joined += scalar_text(e, key);
    }
    return joined;
  }
  throw ConfigError("config key '" + key + "' must be a number, string or list");
}

}  // namespace

double parse_number(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last || std::isnan(value)) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) throw ConfigError("config must be flat; key '" + key + "' is nested");
      cfg.entries_[key] = scalar_text(value, key);
    }
    return cfg;
  }

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (cfg.entries_.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double KeyValueConfig::number(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
  try {
    return parse_number(it->second);
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + it->second + "'");
  }
}

std::vector<double> KeyValueConfig::number_list(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
  std::string text = it->second;
  if (!text.empty() && text.front() == '[') text.erase(0, 1);
  if (!text.empty() && text.back() == ']') text.pop_back();
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item));
  return out;
}

void KeyValueConfig::reject_unknown(const std::vector<std::string>& allowed) const {
  for (const auto& [key, _] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

BudgetConfig budget_config_from(const KeyValueConfig& kv, BudgetConfig base) {
  const auto names = budget_field_names();
  kv.reject_unknown(names);
  for (const auto& name : names) {
    if (kv.contains(name)) set_field(base, name, kv.number(name));
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid budget config: ") + e.what());
  }
  return base;
}

NoiseScanConfig noise_config_from(const KeyValueConfig& kv, NoiseScanConfig base) {
  kv.reject_unknown({"atom_numbers", "max_atoms", "points", "shots_per_point", "shot_noise_var",
                     "projection_coeff", "technical_coeff", "preparation_jitter"});
  if (kv.contains("atom_numbers") && (kv.contains("max_atoms") || kv.contains("points"))) {
    throw ConfigError("give either atom_numbers or max_atoms/points, not both");
  }
  if (kv.contains("atom_numbers")) base.atom_numbers = kv.number_list("atom_numbers");
  if (kv.contains("max_atoms") || kv.contains("points")) {
    const double max_atoms = kv.contains("max_atoms") ? kv.number("max_atoms")
                                                      : base.atom_numbers.back();
    const double points = kv.contains("points") ? kv.number("points")
                                                : static_cast<double>(base.atom_numbers.size());
    if (points < 2 || points != std::floor(points)) throw ConfigError("points must be an integer >= 2");
    base.atom_numbers = linear_grid(max_atoms, static_cast<std::size_t>(points));
  }
  if (kv.contains("shots_per_point")) {
    const double shots = kv.number("shots_per_point");
    if (shots != std::floor(shots) || shots < 0) throw ConfigError("shots_per_point must be an integer");
    base.shots_per_point = static_cast<std::size_t>(shots);
  }
  if (kv.contains("shot_noise_var")) base.shot_noise_var = kv.number("shot_noise_var");
  if (kv.contains("projection_coeff")) base.projection_coeff = kv.number("projection_coeff");
  if (kv.contains("technical_coeff")) base.technical_coeff = kv.number("technical_coeff");
  if (kv.contains("preparation_jitter")) base.preparation_jitter = kv.number("preparation_jitter");
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid noise scan config: ") + e.what());
  }
  return base;
}

}  // namespace polariton
