#pragma once

// UTC timestamps as ISO-8601 strings with millisecond precision.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace phishscope {

using Timestamp = std::chrono::system_clock::time_point;
using Clock = std::function<Timestamp()>;

inline Timestamp system_now() { return std::chrono::system_clock::now(); }

inline std::string format_time(Timestamp t) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

// Accepts YYYY-MM-DDTHH:MM:SS[.fff][Z] and plain epoch seconds (integer or fractional).
inline std::optional<Timestamp> parse_time(std::string_view s) {
    std::string str(s);
    int Y, M, D, h, m, sec;
    int consumed = 0;
    if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &Y, &M, &D, &h, &m, &sec, &consumed) == 6) {
        std::tm tm{};
        tm.tm_year = Y - 1900;
        tm.tm_mon = M - 1;
        tm.tm_mday = D;
        tm.tm_hour = h;
        tm.tm_min = m;
        tm.tm_sec = sec;
        long ms = 0;
        std::string_view rest = std::string_view(str).substr(static_cast<size_t>(consumed));
        if (!rest.empty() && rest.front() == '.') {
            rest.remove_prefix(1);
            int digits = 0;
            while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
                if (digits < 3) ms = ms * 10 + (rest.front() - '0');
                ++digits;
                rest.remove_prefix(1);
            }
            for (; digits < 3; ++digits) ms *= 10;
        }
        if (!rest.empty() && rest != "Z" && rest != "z") return std::nullopt;
        return Timestamp(std::chrono::seconds(timegm(&tm))) + std::chrono::milliseconds(ms);
    }
    try {
        size_t pos = 0;
        double v = std::stod(str, &pos);
        if (pos != str.size() || v < 0) return std::nullopt;
        return Timestamp(std::chrono::milliseconds(static_cast<long long>(v * 1000.0 + 0.5)));
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace phishscope
