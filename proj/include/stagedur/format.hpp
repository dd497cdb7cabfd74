#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

namespace stagedur {

/// Shortest decimal text that parses back to exactly `x`.
inline std::string format_real(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    if (res.ec != std::errc{})
        return std::to_string(x);
    return std::string(buf, res.ptr);
}

/// Fixed 17 significant digits, the canonical serialization form.
inline std::string format_real17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace stagedur
