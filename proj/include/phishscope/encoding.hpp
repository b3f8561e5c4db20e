#pragma once

// Canonicalization of raw page bytes into UTF-8 with decode-and-execute
// script wrappers statically unwrapped.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishscope/core.hpp"

namespace phishscope {

struct NormalizedText {
    std::string text;
    std::string source_charset;  // charset the bytes were decoded from
    int decoded_wrappers = 0;
    int replaced_sequences = 0;
    std::vector<std::string> notes;
};

namespace encoding {

inline void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline constexpr uint32_t kReplacement = 0xFFFD;

// Length of the well-formed UTF-8 sequence starting at s[i], or 0.
inline size_t utf8_sequence_length(std::string_view s, size_t i) {
    auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return 1;
    size_t len;
    uint32_t min_cp;
    uint32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2, min_cp = 0x80, cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3, min_cp = 0x800, cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4, min_cp = 0x10000, cp = b0 & 0x07;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    for (size_t k = 1; k < len; ++k) {
        auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return len;
}

inline bool is_valid_utf8(std::string_view s) {
    for (size_t i = 0; i < s.size();) {
        size_t n = utf8_sequence_length(s, i);
        if (n == 0) return false;
        i += n;
    }
    return true;
}

inline bool is_ascii(std::string_view s) {
    for (char c : s) {
        if (static_cast<unsigned char>(c) >= 0x80) return false;
    }
    return true;
}

// Replaces every maximal invalid subsequence with U+FFFD.
inline std::string sanitize_utf8(std::string_view s, int* replaced = nullptr) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        size_t n = utf8_sequence_length(s, i);
        if (n) {
            out.append(s.substr(i, n));
            i += n;
            continue;
        }
        append_utf8(out, kReplacement);
        if (replaced) ++*replaced;
        ++i;
        while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
    }
    return out;
}

// windows-1252 code points for bytes 0x80..0x9F (0 = undefined).
inline constexpr std::array<uint16_t, 32> kCp1252High = {
    0x20AC, 0,      0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
    0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0,      0x017D, 0,
    0,      0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0,      0x017E, 0x0178};

inline std::string decode_latin1(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    for (unsigned char c : s) append_utf8(out, c);
    return out;
}

inline std::string decode_cp1252(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    for (unsigned char c : s) {
        if (c >= 0x80 && c <= 0x9F) {
            uint16_t cp = kCp1252High[c - 0x80];
            append_utf8(out, cp ? cp : kReplacement);
        } else {
            append_utf8(out, c);
        }
    }
    return out;
}

inline std::string decode_utf16(std::string_view s, bool big_endian, int* replaced) {
    std::string out;
    auto unit = [&](size_t i) -> uint32_t {
        auto a = static_cast<unsigned char>(s[i]);
        auto b = static_cast<unsigned char>(s[i + 1]);
        return big_endian ? (a << 8) | b : (b << 8) | a;
    };
    size_t i = 0;
    while (i + 1 < s.size()) {
        uint32_t u = unit(i);
        i += 2;
        if (u >= 0xD800 && u <= 0xDBFF && i + 1 < s.size()) {
            uint32_t lo = unit(i);
            if (lo >= 0xDC00 && lo <= 0xDFFF) {
                i += 2;
                append_utf8(out, 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00));
                continue;
            }
        }
        if (u >= 0xD800 && u <= 0xDFFF) {
            append_utf8(out, kReplacement);
            if (replaced) ++*replaced;
            continue;
        }
        append_utf8(out, u);
    }
    if (i < s.size()) {
        append_utf8(out, kReplacement);
        if (replaced) ++*replaced;
    }
    return out;
}

inline std::string canonical_charset_name(std::string_view raw) {
    auto name = text::to_lower_ascii(text::trim(raw));
    if (name == "utf8" || name == "utf-8" || name == "unicode-1-1-utf-8") return "utf-8";
    if (name == "iso-8859-1" || name == "iso8859-1" || name == "latin1" || name == "latin-1" ||
        name == "l1" || name == "iso_8859-1")
        return "iso-8859-1";
    // Browsers treat ASCII and Latin-1 labels as windows-1252.
    if (name == "windows-1252" || name == "cp1252" || name == "x-cp1252") return "windows-1252";
    if (name == "us-ascii" || name == "ascii") return "us-ascii";
    if (name == "utf-16" || name == "utf-16le") return "utf-16le";
    if (name == "utf-16be") return "utf-16be";
    return name;
}

struct CharsetDeclaration {
    std::string charset;  // canonical name
    size_t value_begin = 0;
    size_t value_end = 0;
};

// Finds a charset declared in a <meta> tag (either `charset=` attribute or
// the http-equiv content value) within the first 4 KiB, or in an XML prolog.
inline std::optional<CharsetDeclaration> find_charset_declaration(std::string_view bytes) {
    std::string_view head = bytes.substr(0, std::min<size_t>(bytes.size(), 4096));
    size_t pos = 0;
    while ((pos = text::ifind(head, "<meta", pos)) != std::string_view::npos) {
        size_t end = head.find('>', pos);
        if (end == std::string_view::npos) break;
        std::string_view tag = head.substr(pos, end - pos);
        size_t cs = text::ifind(tag, "charset");
        if (cs != std::string_view::npos) {
            size_t i = cs + 7;
            while (i < tag.size() && text::is_space(tag[i])) ++i;
            if (i < tag.size() && tag[i] == '=') {
                ++i;
                while (i < tag.size() && text::is_space(tag[i])) ++i;
                if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) ++i;
                size_t b = i;
                while (i < tag.size() && (std::isalnum(static_cast<unsigned char>(tag[i])) ||
                                          tag[i] == '-' || tag[i] == '_' || tag[i] == ':'))
                    ++i;
                if (i > b) {
                    return CharsetDeclaration{canonical_charset_name(tag.substr(b, i - b)), pos + b,
                                              pos + i};
                }
            }
        }
        pos = end;
    }
    if (text::istarts_with(head, "<?xml")) {
        size_t end = head.find("?>");
        size_t enc = text::ifind(head.substr(0, end), "encoding=");
        if (enc != std::string_view::npos) {
            size_t i = enc + 9;
            if (i < head.size() && (head[i] == '"' || head[i] == '\'')) ++i;
            size_t b = i;
            while (i < head.size() && head[i] != '"' && head[i] != '\'' && head[i] != '?') ++i;
            return CharsetDeclaration{canonical_charset_name(head.substr(b, i - b)), b, i};
        }
    }
    return std::nullopt;
}

// Percent-decoding as done by unescape(): %XX bytes and %uXXXX code points.
inline std::optional<std::string> js_unescape(std::string_view s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 5 < s.size() && (s[i + 1] == 'u' || s[i + 1] == 'U')) {
            auto hex = s.substr(i + 2, 4);
            if (hex.size() == 4 && std::all_of(hex.begin(), hex.end(), [](char c) {
                    return std::isxdigit(static_cast<unsigned char>(c));
                })) {
                append_utf8(out, static_cast<uint32_t>(std::stoul(std::string(hex), nullptr, 16)));
                i += 5;
                continue;
            }
        }
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            auto v = std::stoul(std::string(s.substr(i + 1, 2)), nullptr, 16);
            // unescape maps %XX to the code point U+00XX; for bytes that form
            // UTF-8 when chained with decodeURIComponent the byte value is kept.
            out.push_back(static_cast<char>(v));
            i += 2;
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

inline std::string js_escape(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '@' || c == '*' || c == '_' || c == '+' || c == '-' ||
            c == '.' || c == '/') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 15]);
        }
    }
    return out;
}

// Minimal evaluator for the decode expressions found inside obfuscation
// wrappers:  atob(lit) | unescape(e) | escape(e) | decodeURIComponent(e) |
// decodeURI(e) | String.fromCharCode(n, ...) | lit
class DecodeExpression {
public:
    explicit DecodeExpression(std::string_view src) : src_(src) {}

    // Parses `exec(decode)` forms; returns the decoded payload and the nesting
    // depth of decode calls, or nullopt when the text is not such a wrapper.
    struct Result {
        std::string payload;
        int depth = 0;
        bool decode_failed = false;
    };

    std::optional<Result> parse_wrapper() {
        pos_ = 0;
        skip_ws();
        bool is_function_ctor = false;
        if (consume_word("new")) {
            skip_ws();
            if (!consume_word("Function")) return std::nullopt;
            is_function_ctor = true;
        } else if (consume_word("window.eval") || consume_word("eval")) {
        } else if (consume_word("Function")) {
            is_function_ctor = true;
        } else {
            return std::nullopt;
        }
        skip_ws();
        if (!consume('(')) return std::nullopt;
        Result r;
        auto value = parse_expr(r);
        if (!value) return std::nullopt;
        skip_ws();
        if (!consume(')')) return std::nullopt;
        skip_ws();
        if (is_function_ctor) {
            if (!consume('(')) return std::nullopt;
            skip_ws();
            if (!consume(')')) return std::nullopt;
            skip_ws();
        }
        consume(';');
        skip_ws();
        if (pos_ != src_.size()) return std::nullopt;
        if (r.depth == 0) return std::nullopt;  // eval("literal") is not an encoding wrapper
        if (r.decode_failed) return r;
        r.payload = std::move(*value);
        return r;
    }

private:
    std::optional<std::string> parse_expr(Result& r) {
        skip_ws();
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'' || src_[pos_] == '`'))
            return parse_literal();
        static constexpr std::string_view kFns[] = {
            "window.atob", "atob", "unescape", "escape", "decodeURIComponent", "decodeURI",
            "String.fromCharCode"};
        for (auto fn : kFns) {
            size_t save = pos_;
            if (!consume_word(fn)) continue;
            skip_ws();
            if (!consume('(')) {
                pos_ = save;
                continue;
            }
            if (fn == "String.fromCharCode") {
                std::string out;
                while (true) {
                    skip_ws();
                    size_t b = pos_;
                    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                        ++pos_;
                    if (b == pos_) return std::nullopt;
                    append_utf8(out, static_cast<uint32_t>(std::stoul(std::string(src_.substr(b, pos_ - b)))));
                    skip_ws();
                    if (consume(',')) continue;
                    break;
                }
                if (!consume(')')) return std::nullopt;
                ++r.depth;
                return out;
            }
            auto inner = parse_expr(r);
            if (!inner) return std::nullopt;
            skip_ws();
            if (!consume(')')) return std::nullopt;
            ++r.depth;
            if (fn == "atob" || fn == "window.atob") {
                auto decoded = base64::decode(*inner);
                if (!decoded) {
                    r.decode_failed = true;
                    return std::string();
                }
                return decoded;
            }
            if (fn == "escape") return js_escape(*inner);
            return js_unescape(*inner);
        }
        return std::nullopt;
    }

    std::optional<std::string> parse_literal() {
        char quote = src_[pos_++];
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != quote) {
            char c = src_[pos_++];
            if (c == '\\' && pos_ < src_.size()) {
                char e = src_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    case 'x':
                        if (pos_ + 2 <= src_.size()) {
                            out.push_back(static_cast<char>(
                                std::stoul(std::string(src_.substr(pos_, 2)), nullptr, 16)));
                            pos_ += 2;
                        }
                        break;
                    default: out.push_back(e);
                }
                continue;
            }
            out.push_back(c);
        }
        if (pos_ >= src_.size()) return std::nullopt;
        ++pos_;
        return out;
    }

    void skip_ws() {
        while (pos_ < src_.size() && text::is_space(src_[pos_])) ++pos_;
    }
    bool consume(char c) {
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    bool consume_word(std::string_view w) {
        if (src_.substr(pos_, w.size()) != w) return false;
        size_t after = pos_ + w.size();
        if (after < src_.size() &&
            (std::isalnum(static_cast<unsigned char>(src_[after])) || src_[after] == '_'))
            return false;
        pos_ = after;
        return true;
    }

    std::string_view src_;
    size_t pos_ = 0;
};

inline bool looks_like_script_text(std::string_view s) {
    if (!is_valid_utf8(s)) return false;
    for (unsigned char c : s) {
        if (c < 0x20 && c != '\n' && c != '\r' && c != '\t') return false;
    }
    return text::ifind(s, "</script") == std::string_view::npos;
}

struct ScriptBody {
    size_t begin;
    size_t end;
};

// Byte ranges of inline <script> bodies, skipping comments.
inline std::vector<ScriptBody> find_script_bodies(std::string_view html) {
    std::vector<ScriptBody> out;
    size_t i = 0;
    while (i < html.size()) {
        size_t lt = html.find('<', i);
        if (lt == std::string_view::npos) break;
        if (html.substr(lt, 4) == "<!--") {
            size_t end = html.find("-->", lt + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        if (text::istarts_with(html.substr(lt), "<script") &&
            (lt + 7 >= html.size() || !std::isalnum(static_cast<unsigned char>(html[lt + 7])))) {
            size_t gt = html.find('>', lt);
            if (gt == std::string_view::npos) break;
            size_t close = text::ifind(html, "</script", gt + 1);
            size_t body_end = close == std::string_view::npos ? html.size() : close;
            out.push_back({gt + 1, body_end});
            i = body_end;
            continue;
        }
        i = lt + 1;
    }
    return out;
}

inline constexpr int kMaxUnwrapDepth = 8;

struct UnwrapResult {
    std::string text;
    int layers = 0;
    int decode_depth = 0;  // total decode calls over all layers
    bool undecodable = false;
};

// Repeatedly unwraps a script body until it is no longer a decode wrapper.
inline UnwrapResult unwrap_script(std::string_view body) {
    UnwrapResult r{std::string(body)};
    for (int layer = 0; layer < kMaxUnwrapDepth; ++layer) {
        DecodeExpression expr(r.text);
        auto parsed = expr.parse_wrapper();
        if (!parsed) break;
        if (parsed->decode_failed || !looks_like_script_text(parsed->payload)) {
            r.undecodable = true;
            break;
        }
        r.decode_depth += parsed->depth;
        r.text = std::move(parsed->payload);
        ++r.layers;
    }
    return r;
}

}  // namespace encoding

// Converts arbitrary page bytes to canonical UTF-8: honors BOMs and declared
// charsets, replaces invalid sequences with U+FFFD, and replaces every script
// body that is a decode-and-execute wrapper with the decoded script text.
// Idempotent: f(f(x)) == f(x).
inline NormalizedText normalize_encodings(std::string_view bytes) {
    using namespace encoding;
    NormalizedText out;
    std::string utf8;
    auto decl = find_charset_declaration(bytes);

    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") {
        out.source_charset = "utf-8";
        utf8 = sanitize_utf8(bytes.substr(3), &out.replaced_sequences);
        out.notes.push_back("stripped utf-8 byte order mark");
    } else if (bytes.size() >= 2 && (bytes.substr(0, 2) == "\xFF\xFE" || bytes.substr(0, 2) == "\xFE\xFF")) {
        bool be = bytes[0] == '\xFE';
        out.source_charset = be ? "utf-16be" : "utf-16le";
        utf8 = decode_utf16(bytes.substr(2), be, &out.replaced_sequences);
        out.notes.push_back("transcoded " + out.source_charset);
    } else {
        std::string charset = decl ? decl->charset : "utf-8";
        if (is_ascii(bytes) || charset == "utf-8" ||
            (charset != "iso-8859-1" && charset != "windows-1252" && charset != "us-ascii" &&
             charset != "utf-16le" && charset != "utf-16be")) {
            if (charset != "utf-8" && !is_ascii(bytes) && decl) {
                out.notes.push_back("unsupported charset '" + charset + "', decoded as utf-8");
            }
            out.source_charset = is_ascii(bytes) && decl ? charset : "utf-8";
            utf8 = sanitize_utf8(bytes, &out.replaced_sequences);
        } else {
            out.source_charset = charset;
            if (charset == "iso-8859-1") {
                utf8 = decode_latin1(bytes);
            } else if (charset == "utf-16le" || charset == "utf-16be") {
                utf8 = decode_utf16(bytes, charset == "utf-16be", &out.replaced_sequences);
            } else {
                utf8 = decode_cp1252(bytes);
            }
            out.notes.push_back("transcoded " + charset + " to utf-8");
            // The declaration must match the new bytes or a second pass would
            // transcode again.
            if (auto d2 = find_charset_declaration(utf8)) {
                utf8.replace(d2->value_begin, d2->value_end - d2->value_begin, "utf-8");
            }
        }
    }
    if (out.replaced_sequences) {
        out.notes.push_back("replaced " + std::to_string(out.replaced_sequences) +
                            " invalid byte sequence(s)");
    }

    auto bodies = find_script_bodies(utf8);
    std::string result;
    result.reserve(utf8.size());
    size_t copied = 0;
    for (auto& body : bodies) {
        auto raw = std::string_view(utf8).substr(body.begin, body.end - body.begin);
        auto unwrapped = unwrap_script(text::trim(raw));
        if (unwrapped.undecodable) {
            out.notes.push_back("undecodable script wrapper at byte " + std::to_string(body.begin) +
                                " left verbatim");
        }
        if (unwrapped.layers == 0) continue;
        result.append(utf8, copied, body.begin - copied);
        result += unwrapped.text;
        copied = body.end;
        ++out.decoded_wrappers;
    }
    if (out.decoded_wrappers) {
        result.append(utf8, copied, std::string::npos);
        out.text = std::move(result);
        out.notes.push_back("decoded " + std::to_string(out.decoded_wrappers) + " script wrapper(s)");
    } else {
        out.text = std::move(utf8);
    }
    return out;
}

}  // namespace phishscope
