#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace idsim {

// Shortest round-trip decimal rendering, locale-free, so repeated runs emit
// byte-identical files.
inline std::string csv_num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

inline std::string csv_num(std::int64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace idsim
