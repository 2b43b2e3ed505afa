#include "pmn/common/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pmn/common/error.hpp"

namespace pmn {

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char delimiter) {
    std::vector<std::string> parts;
    std::string current;
    for (char ch : text) {
        if (ch == delimiter) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    parts.push_back(current);
    return parts;
}

std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    (void)ec;
    return std::string(buffer, end);
}

std::vector<KeyValueEntry> parse_key_values(std::istream& in, const std::string& source) {
    std::vector<KeyValueEntry> entries;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source, line_no, "expected 'key = value'");
        }
        KeyValueEntry entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), source, line_no};
        if (entry.key.empty()) throw ParseError(source, line_no, "empty key");
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<KeyValueEntry> parse_key_values_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_key_values(in, path);
}

std::vector<KeyValueEntry> parse_key_values_string(const std::string& text,
                                                   const std::string& source) {
    std::istringstream in(text);
    return parse_key_values(in, source);
}

KeyValueEntry parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || trim(text.substr(0, eq)).empty()) {
        throw ConfigError("override '" + text + "' is not of the form key=value");
    }
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1)), "<command line>", 0};
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> values;
    if (trim(text).empty()) return values;
    for (const auto& part : split(text, ',')) {
        const std::string item = trim(part);
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw ConfigError("'" + item + "' is not an integer");
        }
        values.push_back(value);
    }
    return values;
}

KeyValueReader::KeyValueReader(std::vector<KeyValueEntry> entries)
    : entries_(std::move(entries)), consumed_(entries_.size(), false) {}

bool KeyValueReader::has(const std::string& key) const { return last(key) != nullptr; }

const KeyValueEntry* KeyValueReader::last(const std::string& key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->key == key) return &*it;
    }
    return nullptr;
}

void KeyValueReader::fail(const KeyValueEntry& entry, const std::string& what) const {
    std::string where = entry.source;
    if (entry.line > 0) where += ":" + std::to_string(entry.line);
    throw ConfigError(where + ": key '" + entry.key + "': " + what);
}

std::optional<std::string> KeyValueReader::take(const std::string& key) {
    std::optional<std::string> value;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].key == key) {
            consumed_[i] = true;
            value = entries_[i].value;
        }
    }
    return value;
}

std::vector<std::string> KeyValueReader::take_all(const std::string& key) {
    std::vector<std::string> values;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].key == key) {
            consumed_[i] = true;
            values.push_back(entries_[i].value);
        }
    }
    return values;
}

std::string KeyValueReader::get_string(const std::string& key, const std::string& fallback) {
    auto value = take(key);
    return value ? *value : fallback;
}

std::int64_t KeyValueReader::get_int(const std::string& key, std::int64_t fallback) {
    const KeyValueEntry* entry = last(key);
    take(key);
    if (!entry) return fallback;
    std::int64_t value = 0;
    const auto& text = entry->value;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(*entry, "expected an integer");
    return value;
}

double KeyValueReader::get_double(const std::string& key, double fallback) {
    const KeyValueEntry* entry = last(key);
    take(key);
    if (!entry) return fallback;
    double value = 0;
    const auto& text = entry->value;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(*entry, "expected a number");
    return value;
}

bool KeyValueReader::get_bool(const std::string& key, bool fallback) {
    const KeyValueEntry* entry = last(key);
    take(key);
    if (!entry) return fallback;
    if (entry->value == "true" || entry->value == "1") return true;
    if (entry->value == "false" || entry->value == "0") return false;
    fail(*entry, "expected true or false");
}

std::vector<std::int64_t> KeyValueReader::get_int_list(const std::string& key,
                                                       const std::vector<std::int64_t>& fallback) {
    const KeyValueEntry* entry = last(key);
    take(key);
    if (!entry) return fallback;
    try {
        return parse_int_list(entry->value);
    } catch (const ConfigError& e) {
        fail(*entry, e.what());
    }
}

void KeyValueReader::reject_unknown() const {
    std::string unknown;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (consumed_[i]) continue;
        if (!unknown.empty()) unknown += ", ";
        unknown += "'" + entries_[i].key + "'";
        if (entries_[i].line > 0) {
            unknown += " (" + entries_[i].source + ":" + std::to_string(entries_[i].line) + ")";
        }
    }
    if (!unknown.empty()) throw ConfigError("unknown configuration keys: " + unknown);
}

}  // namespace pmn
