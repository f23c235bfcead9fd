#include "darforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "darforge/data.hpp"
#include "darforge/errors.hpp"

namespace darforge {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    for (;;) {
        const size_t pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

} // namespace

const std::map<std::string, std::vector<std::string>>& run_config_schema() {
    static const std::map<std::string, std::vector<std::string>> schema = {
        {"model", {"spec"}},
        {"train", {"epochs", "lr", "batch_size", "seed", "data", "test_data", "out"}},
        {"attack", {"method", "epsilon", "alpha", "steps", "seed", "opa_samples", "label"}},
        {"dar",
         {"size", "count", "method", "epsilon", "alpha", "steps", "smooth_kernel",
          "smooth_every", "color_gains", "seed"}},
        {"sweep",
         {"sizes", "counts", "methods", "source_model", "checkpoints", "data", "image_count",
          "seed", "epsilon", "alpha", "steps", "smooth_kernel", "smooth_every", "color_gains",
          "soa_epsilon", "min_confidence", "jobs"}},
    };
    return schema;
}

RunConfig parse_run_config(const std::string& text) {
    const auto& schema = run_config_schema();
    RunConfig cfg;
    std::string section;
    std::vector<std::string> lines;
    {
        size_t start = 0;
        for (;;) {
            const size_t eol = text.find('\n', start);
            lines.push_back(text.substr(start, eol - start));
            if (eol == std::string::npos) break;
            start = eol + 1;
        }
    }
    for (size_t li = 0; li < lines.size(); ++li) {
        const int line_no = static_cast<int>(li) + 1;
        const std::string line = trim(lines[li]);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!schema.count(section))
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
        } else {
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
            if (section.empty())
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": key outside any section");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            const auto& keys = schema.at(section);
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "' in section [" + section + "]");
            if (cfg.sections[section].count(key))
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
            cfg.sections[section][key] = value;
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    const auto bytes = read_file(path);
    return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
}

std::string RunConfig::get(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

long RunConfig::get_int(const std::string& section, const std::string& key,
                        long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        size_t used = 0;
        const long r = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return r;
    } catch (const std::logic_error&) {
        throw ConfigError("config " + section + "." + key + ": not an integer: '" + v + "'");
    }
}

double RunConfig::get_float(const std::string& section, const std::string& key,
                            double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
        size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return r;
    } catch (const std::logic_error&) {
        throw ConfigError("config " + section + "." + key + ": not a number: '" + v + "'");
    }
}

std::vector<long> RunConfig::get_int_list(const std::string& section, const std::string& key,
                                          std::vector<long> fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    std::vector<long> out;
    for (const auto& part : split(v, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stol(part, &used));
            if (used != part.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::logic_error&) {
            throw ConfigError("config " + section + "." + key + ": bad list entry '" + part +
                              "'");
        }
    }
    return out;
}

std::vector<std::string> RunConfig::get_list(const std::string& section, const std::string& key,
                                             std::vector<std::string> fallback) const {
    if (!has(section, key)) return fallback;
    return split(get(section, key, ""), ',');
}

} // namespace darforge
