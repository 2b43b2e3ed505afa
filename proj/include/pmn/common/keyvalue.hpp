#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pmn {

/// One `key = value` line from a structured text configuration file.
struct KeyValueEntry {
    std::string key;
    std::string value;
    std::string source;
    std::size_t line = 0;
};

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Repeated keys are kept in order.
std::vector<KeyValueEntry> parse_key_values(std::istream& in, const std::string& source);
std::vector<KeyValueEntry> parse_key_values_file(const std::string& path);
std::vector<KeyValueEntry> parse_key_values_string(const std::string& text,
                                                   const std::string& source = "<string>");

/// Parses a `key=value` command-line override.
KeyValueEntry parse_override(const std::string& text);

/// Typed reader over parsed entries that tracks which keys were consumed,
/// so that unknown keys can be rejected once every consumer has run.
class KeyValueReader {
public:
    explicit KeyValueReader(std::vector<KeyValueEntry> entries);

    bool has(const std::string& key) const;

    /// Last occurrence wins, letting overrides appended later take effect.
    std::optional<std::string> take(const std::string& key);
    std::vector<std::string> take_all(const std::string& key);

    std::string get_string(const std::string& key, const std::string& fallback);
    std::int64_t get_int(const std::string& key, std::int64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<std::int64_t> get_int_list(const std::string& key,
                                           const std::vector<std::int64_t>& fallback);

    /// Throws ConfigError naming every key nobody consumed.
    void reject_unknown() const;

private:
    const KeyValueEntry* last(const std::string& key) const;
    [[noreturn]] void fail(const KeyValueEntry& entry, const std::string& what) const;

    std::vector<KeyValueEntry> entries_;
    std::vector<bool> consumed_;
};

std::vector<std::int64_t> parse_int_list(const std::string& text);
std::string trim(const std::string& text);
std::vector<std::string> split(const std::string& text, char delimiter);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace pmn
