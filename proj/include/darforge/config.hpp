#pragma once

#include <map>
#include <string>
#include <vector>

namespace darforge {

// Line-oriented run configuration: `[section]` headers, `key = value`
// entries, `#` comments. Sections and keys are validated against the
// documented schema; anything unknown is rejected with its line number.
struct RunConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    // Typed getters; throw ConfigError naming section.key on bad values.
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    double get_float(const std::string& section, const std::string& key, double fallback) const;
    std::vector<long> get_int_list(const std::string& section, const std::string& key,
                                   std::vector<long> fallback) const;
    std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                      std::vector<std::string> fallback) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// The documented schema: section -> allowed keys.
const std::map<std::string, std::vector<std::string>>& run_config_schema();

} // namespace darforge
