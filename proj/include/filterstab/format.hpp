#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace filterstab {

/// Shortest decimal form that round-trips; the output is stable across runs,
/// which the byte-identical CSV contract relies on.
inline std::string format_double(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) {
        return std::to_string(x);
    }
    return std::string(buf, end);
}

/// Fixed number of significant digits for human-facing summaries.
inline std::string format_short(double x, int digits = 6)
{
    if (std::isnan(x) || std::isinf(x)) {
        return format_double(x);
    }
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, digits);
    if (ec != std::errc{}) {
        return std::to_string(x);
    }
    return std::string(buf, end);
}

} // namespace filterstab
