#include "neuroexc/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "neuroexc/errors.hpp"

namespace neuroexc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

double parse_double(std::string_view token) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc{} || ptr != end) {
        throw ConfigError("not a number: '" + std::string(token) + "'");
    }
    return value;
}

long parse_int(std::string_view token) {
    token = trim(token);
    long value = 0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc{} || ptr != end) {
        throw ConfigError("not an integer: '" + std::string(token) + "'");
    }
    return value;
}

bool parse_bool(std::string_view token) {
    token = trim(token);
    if (token == "true" || token == "1" || token == "yes" || token == "on") return true;
    if (token == "false" || token == "0" || token == "no" || token == "off") return false;
    throw ConfigError("not a boolean: '" + std::string(token) + "'");
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
    KeyValueFile file;
    file.source_ = std::move(source);
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(file.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(file.source_ + ":" + std::to_string(line_no) + ": empty key");
        }
        file.entries_.push_back({std::string(key), std::string(value), line_no});
    }
    return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto file = parse(buf.str(), path.string());
    file.base_dir_ = path.parent_path();
    return file;
}

bool KeyValueFile::contains(std::string_view key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.key == key; });
}

const KeyValueEntry* KeyValueFile::find_single(std::string_view key) const {
    const KeyValueEntry* found = nullptr;
    for (const auto& e : entries_) {
        if (e.key != key) continue;
        if (found != nullptr) fail(e, "key '" + e.key + "' given more than once");
        found = &e;
    }
    return found;
}

std::optional<std::string> KeyValueFile::get(std::string_view key) const {
    if (const auto* e = find_single(key)) return e->value;
    return std::nullopt;
}

std::vector<std::string> KeyValueFile::get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        if (e.key == key) out.push_back(e.value);
    }
    return out;
}

double KeyValueFile::get_double(std::string_view key, double fallback) const {
    const auto* e = find_single(key);
    if (e == nullptr) return fallback;
    try {
        return parse_double(e->value);
    } catch (const ConfigError& err) {
        fail(*e, err.what());
    }
}

double KeyValueFile::require_double(std::string_view key) const {
    if (find_single(key) == nullptr) {
        throw ConfigError(source_ + ": missing required key '" + std::string(key) + "'");
    }
    return get_double(key, 0.0);
}

long KeyValueFile::get_int(std::string_view key, long fallback) const {
    const auto* e = find_single(key);
    if (e == nullptr) return fallback;
    try {
        return parse_int(e->value);
    } catch (const ConfigError& err) {
        fail(*e, err.what());
    }
}

bool KeyValueFile::get_bool(std::string_view key, bool fallback) const {
    const auto* e = find_single(key);
    if (e == nullptr) return fallback;
    try {
        return parse_bool(e->value);
    } catch (const ConfigError& err) {
        fail(*e, err.what());
    }
}

std::string KeyValueFile::get_string(std::string_view key, std::string fallback) const {
    const auto* e = find_single(key);
    return e == nullptr ? std::move(fallback) : e->value;
}

std::filesystem::path KeyValueFile::get_path(std::string_view key) const {
    const auto* e = find_single(key);
    if (e == nullptr) {
        throw ConfigError(source_ + ": missing required key '" + std::string(key) + "'");
    }
    std::filesystem::path p(e->value);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p;
}

void KeyValueFile::reject_unknown(std::initializer_list<std::string_view> known) const {
    for (const auto& e : entries_) {
        if (std::find(known.begin(), known.end(), e.key) == known.end()) {
            fail(e, "unknown key '" + e.key + "'");
        }
    }
}

void KeyValueFile::fail(const KeyValueEntry& entry, const std::string& message) const {
    throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": " + message);
}

}  // namespace neuroexc
