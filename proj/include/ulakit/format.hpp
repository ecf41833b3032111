#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace ulakit {

/// Locale-independent scientific notation with 17 significant digits.
/// Output is byte-stable across runs, which the CSV goldens rely on.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

/// Quote a field for CSV output when it contains separators or quotes.
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace ulakit
