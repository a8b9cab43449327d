#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace colarec {

enum class ValueType { integer, real, boolean, text };

struct ConfigKey {
    std::string name;
    ValueType type;
    std::string default_value;
    std::string help;
    /// Paths are left out of the config hash so relocated runs compare equal.
    bool is_path = false;
};

const std::vector<ConfigKey>& config_schema();
const ConfigKey* find_config_key(std::string_view name);

/// snake_case key -> --kebab-case flag name (without dashes).
std::string kebab(std::string_view key);

/// Flat key/value run settings validated against config_schema().
class RunConfig {
public:
    RunConfig();

    /// `key = value` lines; `#` starts a comment line. Unknown keys, bad
    /// values and repeated keys are errors naming the line.
    static RunConfig from_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    void merge_file(const std::filesystem::path& path);

    const std::string& text(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    double real(const std::string& key) const;
    bool flag(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    /// 16 hex digits over the non-path keys.
    std::string hash() const;
    /// Non-path settings as `key = value` lines.
    std::string to_text() const;

private:
    const std::string& raw(const std::string& key, ValueType type) const;

    std::map<std::string, std::string> values_;
};

}  // namespace colarec
