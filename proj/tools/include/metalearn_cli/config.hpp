#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metalearn::cli {

/// Bad config file, unknown key or unparsable value. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigKey {
    std::string path;  // "section.key"
    std::string value;
    std::string help;
};

/// Flat `[section] key = value` document over a fixed schema. Every key has a
/// default; files may only set keys the schema knows about.
class Config {
public:
    explicit Config(std::vector<ConfigKey> schema);

    /// Parse an INI file; unknown sections or keys are rejected with their path.
    void load_file(const std::filesystem::path& path);
    void load_string(const std::string& text);
    void set(const std::string& path, const std::string& value);
    void set_all(const std::vector<std::pair<std::string, std::string>>& values);
    bool has(const std::string& path) const { return values_.count(path) != 0; }

    const std::string& text(const std::string& path) const;
    double real(const std::string& path) const;
    std::size_t count(const std::string& path) const;
    std::uint64_t u64(const std::string& path) const;
    bool flag(const std::string& path) const;
    std::vector<double> reals(const std::string& path) const;
    std::vector<std::size_t> counts(const std::string& path) const;
    std::vector<std::string> words(const std::string& path) const;

    /// Every key with its effective value, grouped by section, in schema order.
    std::string resolved() const;

private:
    std::vector<ConfigKey> schema_;
    std::map<std::string, std::string> values_;
};

}  // namespace metalearn::cli
