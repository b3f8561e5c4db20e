#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phishscope {

enum class Label { benign, phishing };

inline std::string_view to_string(Label label) {
    return label == Label::phishing ? "phishing" : "benign";
}

inline std::optional<Label> label_from_string(std::string_view s) {
    if (s == "phishing") return Label::phishing;
    if (s == "benign") return Label::benign;
    return std::nullopt;
}

// Base for every error the library raises. Callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedInput : public Error { using Error::Error; };
class ElementTooLarge : public Error { using Error::Error; };
class ScorerUnavailable : public Error { using Error::Error; };
class DegenerateCorpus : public Error { using Error::Error; };
class NotPhishing : public Error { using Error::Error; };
class EmptySelection : public Error { using Error::Error; };
class DegenerateExplanation : public Error { using Error::Error; };
class GeneratorUnavailable : public Error { using Error::Error; };
class StorageError : public Error { using Error::Error; };
class FetchError : public Error { using Error::Error; };

namespace text {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = ascii_lower(c);
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
    }
    return true;
}

inline bool istarts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

inline size_t ifind(std::string_view hay, std::string_view needle, size_t from = 0) {
    if (needle.empty()) return from <= hay.size() ? from : std::string_view::npos;
    for (size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (iequals(hay.substr(i, needle.size()), needle)) return i;
    }
    return std::string_view::npos;
}

inline std::string_view trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

// Collapses every whitespace run to one space and trims both ends.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Lowercases ASCII letters and the Latin-1 Supplement / Latin Extended-A /
// Greek / Cyrillic upper-case ranges of UTF-8 text. Anything else passes
// through untouched.
inline std::string to_lower_utf8(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out.push_back(ascii_lower(static_cast<char>(c)));
            ++i;
            continue;
        }
        if ((c & 0xE0) == 0xC0 && i + 1 < s.size()) {
            uint32_t cp = ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
            uint32_t lower = cp;
            if ((cp >= 0xC0 && cp <= 0xDE && cp != 0xD7)) lower = cp + 0x20;
            else if (cp == 0x178) lower = 0xFF;
            else if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x138 && cp != 0x149 &&
                     cp != 0x17F) {
                // Latin Extended-A pairs: even upper / odd lower, with a shifted
                // block between U+0139 and U+0148 and again from U+0179.
                bool shifted = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
                if (shifted ? (cp % 2 == 1) : (cp % 2 == 0)) lower = cp + 1;
            } else if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) lower = cp + 0x20;
            else if (cp >= 0x410 && cp <= 0x42F) lower = cp + 0x20;
            else if (cp >= 0x400 && cp <= 0x40F) lower = cp + 0x50;
            if (lower == cp) {
                out.append(s.substr(i, 2));
            } else {
                out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
                out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
            }
            i += 2;
            continue;
        }
        out.push_back(static_cast<char>(c));
        ++i;
    }
    return out;
}

// True when the UTF-8 text contains an upper-case code point that
// to_lower_utf8 would map.
inline bool has_upper_utf8(std::string_view s) { return to_lower_utf8(s) != s; }

}  // namespace text

namespace base64 {

inline int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
}

inline std::string encode(std::string_view in) {
    static constexpr char kAlphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= in.size()) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8) |
                     static_cast<unsigned char>(in[i + 2]);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back(kAlphabet[v & 63]);
        i += 3;
    }
    size_t rest = in.size() - i;
    if (rest == 1) {
        uint32_t v = static_cast<unsigned char>(in[i]) << 16;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

// Strict decode: whitespace is skipped, padding optional, any other
// character outside the alphabet fails.
inline std::optional<std::string> decode(std::string_view in) {
    std::string out;
    uint32_t acc = 0;
    int bits = 0;
    size_t pad = 0;
    for (char c : in) {
        if (text::is_space(c)) continue;
        if (c == '=') {
            ++pad;
            continue;
        }
        if (pad) return std::nullopt;
        int v = decode_char(c);
        if (v < 0) return std::nullopt;
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    if (pad > 2 || bits >= 6) return std::nullopt;
    return out;
}

}  // namespace base64

// 64-bit FNV-1a. Used wherever a stable, platform-independent hash is needed
// (feature hashing, dedup keys, file names).
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
    uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace phishscope
