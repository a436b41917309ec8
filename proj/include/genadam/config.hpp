#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace genadam {

/// Flat key-value configuration. Sorted map so header echoes are canonical.
using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines; blank lines and full-line `#` comments are
/// skipped; duplicate keys: last one wins.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

/// Typed lookups. Missing key returns the fallback; a present but malformed
/// value throws.
std::string config_string(const ConfigMap& cfg, const std::string& key,
                          const std::string& fallback);
double config_double(const ConfigMap& cfg, const std::string& key, double fallback);
std::int64_t config_int(const ConfigMap& cfg, const std::string& key,
                        std::int64_t fallback);
bool config_bool(const ConfigMap& cfg, const std::string& key, bool fallback);

/// Comma-separated list of reals ("0,0.25,0.5").
std::vector<double> parse_double_list(const std::string& text);

/// Throws listing any key not in `known`.
void require_known_keys(const ConfigMap& cfg, const std::vector<std::string>& known);

}  // namespace genadam
