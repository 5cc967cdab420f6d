#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace chb {

/// Flat key/value configuration.  Files use INI-like sections:
///
///   # comment
///   [hum]
///   epsilon = 1e-6
///
/// and keys are addressed as "section.key".  Values are kept as strings and
/// converted on access; conversion failures throw ConfigError naming the key.
class Config {
public:
    /// Every recognised key with its default value.
    static const Config& defaults();

    /// Parses config text.  Throws ConfigError on syntax errors, reporting
    /// `origin` and the line number.
    static Config parse(std::istream& in, const std::string& origin = "<config>");
    static Config load(const std::filesystem::path& path);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    /// "key=value"
    void apply_override(const std::string& assignment);

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    unsigned long long get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    /// Whitespace- or comma-separated numbers.
    std::vector<double> get_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }
    /// Keys not present in `reference`.
    std::vector<std::string> unknown_keys(const Config& reference) const;

    /// Section-grouped text that parse() reads back to the same entries.
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
};

/// defaults, then the file (if any), then the overrides.  Unknown keys from
/// either source are collected and reported in a single ConfigError.
Config resolve_config(const std::filesystem::path* file, const std::vector<std::string>& overrides);

}  // namespace chb
