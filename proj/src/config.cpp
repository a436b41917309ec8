#include "genadam/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace genadam {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* want) {
  throw std::invalid_argument("config key '" + key + "': cannot parse '" + value +
                              "' as " + want);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    out[key] = value;  // duplicates: last wins
  }
  return out;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

double config_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& v = it->second;
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') bad_value(key, v, "a real number");
  return x;
}

std::int64_t config_int(const ConfigMap& cfg, const std::string& key,
                        std::int64_t fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& v = it->second;
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    // Accept exponent notation for counts (T = 1e6).
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' ||
        d != static_cast<double>(static_cast<std::int64_t>(d)))
      bad_value(key, v, "an integer");
    return static_cast<std::int64_t>(d);
  }
  return x;
}

bool config_bool(const ConfigMap& cfg, const std::string& key, bool fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  bad_value(key, it->second, "a boolean");
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    std::string field =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::string t = trim(field);
    if (!t.empty()) {
      char* end = nullptr;
      double x = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0')
        throw std::invalid_argument("cannot parse list element '" + t + "'");
      out.push_back(x);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void require_known_keys(const ConfigMap& cfg, const std::vector<std::string>& known) {
  std::string unknown;
  for (const auto& [key, value] : cfg) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) throw std::invalid_argument("unknown config keys: " + unknown);
}

}  // namespace genadam
