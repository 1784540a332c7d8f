#pragma once

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace neuroexc {

struct KeyValueEntry {
    std::string key;
    std::string value;
    int line = 0;
};

/// Line-oriented `key = value` file. `#` starts a comment; blank lines are
/// ignored; keys may repeat (events, poles) and keep their file order.
class KeyValueFile {
public:
    static KeyValueFile parse(std::string_view text, std::string source = "<string>");
    static KeyValueFile load(const std::filesystem::path& path);

    [[nodiscard]] const std::vector<KeyValueEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const std::string& source() const noexcept { return source_; }
    /// Directory used to resolve relative paths found in values.
    [[nodiscard]] const std::filesystem::path& base_dir() const noexcept { return base_dir_; }

    [[nodiscard]] bool contains(std::string_view key) const;
    /// Last value for `key`; throws ConfigError if the key appears more than once.
    [[nodiscard]] std::optional<std::string> get(std::string_view key) const;
    [[nodiscard]] std::vector<std::string> get_all(std::string_view key) const;

    [[nodiscard]] double get_double(std::string_view key, double fallback) const;
    [[nodiscard]] double require_double(std::string_view key) const;
    [[nodiscard]] long get_int(std::string_view key, long fallback) const;
    [[nodiscard]] bool get_bool(std::string_view key, bool fallback) const;
    [[nodiscard]] std::string get_string(std::string_view key, std::string fallback) const;
    [[nodiscard]] std::filesystem::path get_path(std::string_view key) const;

    /// Throws ConfigError naming the first key not in `known`.
    void reject_unknown(std::initializer_list<std::string_view> known) const;

    [[noreturn]] void fail(const KeyValueEntry& entry, const std::string& message) const;

private:
    [[nodiscard]] const KeyValueEntry* find_single(std::string_view key) const;

    std::vector<KeyValueEntry> entries_;
    std::string source_;
    std::filesystem::path base_dir_;
};

double parse_double(std::string_view token);
long parse_int(std::string_view token);
bool parse_bool(std::string_view token);
std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace neuroexc
