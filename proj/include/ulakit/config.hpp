#pragma once

// Experiment config files: a TOML subset read into a JSON tree.
//
// Supported: comments, bare and quoted keys, dotted keys, [table] headers,
// basic strings with escapes, literal 'strings', integers, floats (incl. inf/nan), booleans,
// arrays (may span lines) and inline tables. Redefining a key is an error.
// Key-level validation (unknown keys etc.) is done by ConfigReader.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulakit/error.hpp"

namespace ulakit {

using Json = nlohmann::json;

namespace detail {

class TomlParser {
public:
    explicit TomlParser(std::string_view text) : s_(text) {}

    Json parse() {
        Json root = Json::object();
        Json* table = &root;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                skip_ws();
                const auto path = parse_key_path();
                skip_ws();
                expect(']');
                table = &descend(root, path, true);
            } else {
                const auto path = parse_key_path();
                skip_ws();
                expect('=');
                skip_ws();
                assign(*table, path, parse_value());
            }
            skip_ws();
            skip_comment();
            if (!eof() && peek() != '\n' && peek() != '\r') fail("expected end of line");
        }
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line_) + ": " + msg);
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (!eof() && peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }
    void skip_ws_comments_newlines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (!eof() && (peek() == '\n' || peek() == '\r')) {
                if (peek() == '\n') ++line_;
                ++pos_;
            } else {
                break;
            }
        }
    }

    static bool bare_key_char(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    }

    std::string parse_key() {
        if (!eof() && peek() == '"') return parse_string();
        const std::size_t start = pos_;
        while (!eof() && bare_key_char(peek())) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_key()};
        skip_ws();
        while (!eof() && peek() == '.') {
            ++pos_;
            skip_ws();
            path.push_back(parse_key());
            skip_ws();
        }
        return path;
    }

    Json& descend(Json& root, const std::vector<std::string>& path, bool header) {
        Json* cur = &root;
        for (std::size_t i = 0; i < path.size(); ++i) {
            const auto& k = path[i];
            if (!cur->contains(k)) {
                (*cur)[k] = Json::object();
            } else if (!(*cur)[k].is_object()) {
                fail("key '" + k + "' is not a table");
            } else if (header && i + 1 == path.size() && defined_headers_.count(joined(path))) {
                fail("table [" + joined(path) + "] defined twice");
            }
            cur = &(*cur)[k];
        }
        if (header) defined_headers_.insert(joined(path));
        return *cur;
    }

    static std::string joined(const std::vector<std::string>& path) {
        std::string out;
        for (const auto& k : path) out += (out.empty() ? "" : ".") + k;
        return out;
    }

    void assign(Json& table, const std::vector<std::string>& path, Json value) {
        Json* cur = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            if (!cur->contains(path[i])) (*cur)[path[i]] = Json::object();
            cur = &(*cur)[path[i]];
            if (!cur->is_object()) fail("key '" + path[i] + "' is not a table");
        }
        if (cur->contains(path.back())) fail("key '" + path.back() + "' defined twice");
        (*cur)[path.back()] = std::move(value);
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated escape");
            const char e = s_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                default: fail(std::string("unsupported escape \\") + e);
            }
        }
        return out;
    }

    // Single-quoted: no escapes.
    std::string parse_literal_string() {
        expect('\'');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '\'') break;
            out += c;
        }
        return out;
    }

    Json parse_number_or_word() {
        const std::size_t start = pos_;
        while (!eof() && (bare_key_char(peek()) || peek() == '+' || peek() == '.')) ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
        if (tok == "-inf") return -std::numeric_limits<double>::infinity();
        if (tok == "nan" || tok == "+nan" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();
        std::string clean;
        for (std::size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == '_') {
                if (i == 0 || i + 1 == tok.size()) fail("bad number '" + tok + "'");
                continue;
            }
            clean += tok[i];
        }
        if (clean.empty()) fail("expected a value");
        const char* b = clean.data();
        const char* e = b + clean.size();
        if (*b == '+') ++b;
        const bool is_float = clean.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            if (*b != '-') {
                std::uint64_t u = 0;
                auto r = std::from_chars(b, e, u);
                if (r.ec == std::errc{} && r.ptr == e) {
                    if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
                        return static_cast<std::int64_t>(u);
                    return u;
                }
            } else {
                std::int64_t i = 0;
                auto r = std::from_chars(b, e, i);
                if (r.ec == std::errc{} && r.ptr == e) return i;
            }
            fail("bad integer '" + tok + "'");
        }
        double d = 0.0;
        auto r = std::from_chars(b, e, d);
        if (r.ec != std::errc{} || r.ptr != e) fail("bad number '" + tok + "'");
        return d;
    }

    void skip_array_space() {
        while (!eof()) {
            skip_ws_comments_newlines();
            if (eof() || (peek() != ' ' && peek() != '\t')) break;
        }
    }

    Json parse_value() {
        if (eof()) fail("expected a value");
        const char c = peek();
        if (c == '"') return parse_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') {
            ++pos_;
            Json arr = Json::array();
            skip_array_space();
            while (!eof() && peek() != ']') {
                arr.push_back(parse_value());
                skip_array_space();
                if (!eof() && peek() == ',') {
                    ++pos_;
                    skip_array_space();
                } else {
                    break;
                }
            }
            expect(']');
            return arr;
        }
        if (c == '{') {
            ++pos_;
            Json obj = Json::object();
            skip_ws();
            if (!eof() && peek() == '}') {
                ++pos_;
                return obj;
            }
            while (true) {
                skip_ws();
                const auto path = parse_key_path();
                skip_ws();
                expect('=');
                skip_ws();
                assign(obj, path, parse_value());
                skip_ws();
                if (!eof() && peek() == ',') {
                    ++pos_;
                    continue;
                }
                expect('}');
                break;
            }
            return obj;
        }
        return parse_number_or_word();
    }

    std::set<std::string> defined_headers_;
};

}  // namespace detail

inline Json parse_config(std::string_view text) { return detail::TomlParser(text).parse(); }

inline Json load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Typed access to one table with unknown-key detection: every key must be
/// read (or explicitly ignored) before finish(), which rejects leftovers.
class ConfigReader {
public:
    ConfigReader(const Json& table, std::string where) : table_(table), where_(std::move(where)) {
        if (!table_.is_object()) throw ConfigError(where_ + ": expected a table");
    }

    bool has(const std::string& key) const { return table_.contains(key); }

    const Json& raw(const std::string& key) {
        used_.insert(key);
        if (!table_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
        return table_.at(key);
    }

    double number(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

    std::uint64_t unsigned_int(const std::string& key) {
        const Json& v = raw(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        throw ConfigError(path(key) + ": expected a non-negative integer");
    }
    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
        return has(key) ? unsigned_int(key) : mark(key, fallback);
    }

    std::string string(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : mark(key, fallback);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return mark(key, fallback);
        const Json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_array()) throw ConfigError(path(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(path(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    ConfigReader table(const std::string& key) { return ConfigReader(raw(key), path(key)); }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }
    const std::string& where() const { return where_; }

    void finish() const {
        for (const auto& [k, v] : table_.items()) {
            if (!used_.count(k)) throw ConfigError(path(k) + ": unknown key");
        }
    }

private:
    template <class T>
    T mark(const std::string& key, T v) {
        used_.insert(key);
        return v;
    }

    const Json& table_;
    std::string where_;
    std::set<std::string> used_;
};

}  // namespace ulakit
