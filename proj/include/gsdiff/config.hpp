// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsdiff/detail/bytes.hpp"
#include "gsdiff/error.hpp"

namespace gsdiff {

/// Flat key/value configuration read from a TOML-style file:
///
///     # comment
///     seed = 7
///     [train]
///     lambda_3d = 0.1     # becomes "train.lambda_3d"
///     [segmentation]
///     source = "oracle"
///
/// Only scalars are supported. Quotes around strings are optional.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& origin = "<config>") {
        KeyValueConfig cfg;
        std::string section;
        std::istringstream in{std::string(text)};
        std::string line;
        int lineno = 0;
        std::vector<std::string> errors;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string s = trim(strip_comment(line));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']' || s.size() < 3) {
                    errors.push_back(origin + ":" + std::to_string(lineno) + ": malformed section header");
                    continue;
                }
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                errors.push_back(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
                continue;
            }
            const std::string key = trim(s.substr(0, eq));
            if (key.empty()) {
                errors.push_back(origin + ":" + std::to_string(lineno) + ": empty key");
                continue;
            }
            cfg.values_[section.empty() ? key : section + "." + key] = unquote(trim(s.substr(eq + 1)));
        }
        if (!errors.empty()) throw ConfigError(join(errors));
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        const auto buf = detail::read_file(path);
        return parse(std::string_view(buf.data(), buf.size()), path.string());
    }

    /// Applies a `key=value` override.
    void set(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
        const std::string key = trim(std::string(assignment.substr(0, eq)));
        if (key.empty()) throw ConfigError("override '" + std::string(assignment) + "' has an empty key");
        values_[key] = unquote(trim(std::string(assignment.substr(eq + 1))));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

private:
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::string unquote(const std::string& s) {
        if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
            return s.substr(1, s.size() - 2);
        }
        return s;
    }

    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) out += (out.empty() ? "" : "\n") + s;
        return out;
    }

    std::map<std::string, std::string> values_;
};

/// Typed reads from a KeyValueConfig that collect every problem instead of
/// stopping at the first.
class ConfigReader {
public:
    explicit ConfigReader(const KeyValueConfig& cfg) : cfg_(cfg) {}

    void read(const std::string& key, double& out) {
        touch(key);
        if (!cfg_.has(key)) return;
        const std::string v = cfg_.get(key, "");
        try {
            std::size_t used = 0;
            out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            errors_.push_back(key + ": expected a number, got '" + v + "'");
        }
    }

    template <class Int>
        requires std::is_integral_v<Int>
    void read(const std::string& key, Int& out) {
        touch(key);
        if (!cfg_.has(key)) return;
        const std::string v = cfg_.get(key, "");
        try {
            std::size_t used = 0;
            const long long x = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            if (std::is_unsigned_v<Int> && x < 0) throw std::out_of_range(v);
            out = static_cast<Int>(x);
        } catch (const std::exception&) {
            errors_.push_back(key + ": expected an integer, got '" + v + "'");
        }
    }

    void read(const std::string& key, bool& out) {
        touch(key);
        if (!cfg_.has(key)) return;
        const std::string v = cfg_.get(key, "");
        if (v == "true" || v == "1" || v == "yes") {
            out = true;
        } else if (v == "false" || v == "0" || v == "no") {
            out = false;
        } else {
            errors_.push_back(key + ": expected true/false, got '" + v + "'");
        }
    }

    void read(const std::string& key, std::string& out) {
        touch(key);
        if (cfg_.has(key)) out = cfg_.get(key, out);
    }

    void fail(const std::string& message) { errors_.push_back(message); }

    /// Unknown keys are reported too, so typos do not pass silently.
    void finish() {
        for (const auto& [k, v] : cfg_.values()) {
            if (!known_.count(k)) errors_.push_back(k + ": unknown configuration key");
        }
        if (!errors_.empty()) {
            std::string msg = "configuration has " + std::to_string(errors_.size()) + " problem(s):";
            for (const auto& e : errors_) msg += "\n  - " + e;
            throw ConfigError(msg);
        }
    }

    const std::vector<std::string>& errors() const { return errors_; }

private:
    void touch(const std::string& key) { known_[key] = true; }

    const KeyValueConfig& cfg_;
    std::map<std::string, bool> known_;
    std::vector<std::string> errors_;
};

} // namespace gsdiff
