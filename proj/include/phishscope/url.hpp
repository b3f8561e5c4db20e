#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "phishscope/core.hpp"

namespace phishscope {

// Just enough RFC 3986 to classify links and resolve relative references.
struct Url {
    std::string scheme;  // lowercase, no ':'
    std::string host;    // lowercase
    int port = 0;        // 0 = scheme default
    std::string path;    // begins with '/' for hierarchical urls
    std::string query;   // without '?'
    std::string fragment;

    bool has_authority() const { return !host.empty(); }

    std::string origin() const {
        std::string out = scheme + "://" + host;
        if (port) out += ":" + std::to_string(port);
        return out;
    }

    std::string to_string() const {
        std::string out = origin() + (path.empty() ? "/" : path);
        if (!query.empty()) out += "?" + query;
        if (!fragment.empty()) out += "#" + fragment;
        return out;
    }

    static std::optional<Url> parse(std::string_view raw) {
        auto s = text::trim(raw);
        size_t colon = s.find(':');
        if (colon == std::string_view::npos || colon == 0) return std::nullopt;
        for (size_t i = 0; i < colon; ++i) {
            char c = s[i];
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.'))
                return std::nullopt;
        }
        Url u;
        u.scheme = text::to_lower_ascii(s.substr(0, colon));
        auto rest = s.substr(colon + 1);
        if (rest.substr(0, 2) == "//") {
            rest.remove_prefix(2);
            size_t end = rest.find_first_of("/?#");
            auto authority = rest.substr(0, end);
            rest = end == std::string_view::npos ? std::string_view() : rest.substr(end);
            if (auto at = authority.rfind('@'); at != std::string_view::npos)
                authority.remove_prefix(at + 1);
            auto pcolon = authority.rfind(':');
            if (pcolon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
                auto port = authority.substr(pcolon + 1);
                authority = authority.substr(0, pcolon);
                if (!port.empty()) {
                    for (char c : port)
                        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
                    if (port.size() > 5) return std::nullopt;
                    u.port = std::stoi(std::string(port));
                }
            }
            u.host = text::to_lower_ascii(authority);
            for (char c : u.host) {
                if (text::is_space(c) || c == '<' || c == '>' || c == '"') return std::nullopt;
            }
        }
        split_path(rest, u);
        if ((u.scheme == "http" && u.port == 80) || (u.scheme == "https" && u.port == 443)) u.port = 0;
        return u;
    }

    // RFC 3986 section 5.2 reference resolution.
    std::optional<Url> resolve(std::string_view ref_raw) const {
        auto ref = text::trim(ref_raw);
        if (auto abs = parse(ref)) return abs;
        Url out;
        out.scheme = scheme;
        if (ref.substr(0, 2) == "//") return parse(scheme + ":" + std::string(ref));
        out.host = host;
        out.port = port;
        Url tmp;
        split_path(ref, tmp);
        if (tmp.path.empty()) {
            out.path = path;
            out.query = ref.find('?') != std::string_view::npos ? tmp.query : query;
        } else {
            if (tmp.path.front() == '/') {
                out.path = remove_dot_segments(tmp.path);
            } else {
                auto base_dir = path.substr(0, path.rfind('/') + 1);
                if (base_dir.empty()) base_dir = "/";
                out.path = remove_dot_segments(base_dir + tmp.path);
            }
            out.query = tmp.query;
        }
        out.fragment = tmp.fragment;
        return out;
    }

    static std::string remove_dot_segments(const std::string& in) {
        std::vector<std::string> out;
        auto parts = text::split(in, '/');
        for (size_t i = 0; i < parts.size(); ++i) {
            const auto& seg = parts[i];
            if (seg == ".") {
                if (i + 1 == parts.size()) out.emplace_back();
                continue;
            }
            if (seg == "..") {
                if (out.size() > 1) out.pop_back();
                if (i + 1 == parts.size()) out.emplace_back();
                continue;
            }
            out.push_back(seg);
        }
        auto joined = text::join(out, "/");
        if (joined.empty() || joined.front() != '/') joined.insert(joined.begin(), '/');
        return joined;
    }

private:
    static void split_path(std::string_view rest, Url& u) {
        if (auto hash = rest.find('#'); hash != std::string_view::npos) {
            u.fragment = std::string(rest.substr(hash + 1));
            rest = rest.substr(0, hash);
        }
        if (auto q = rest.find('?'); q != std::string_view::npos) {
            u.query = std::string(rest.substr(q + 1));
            rest = rest.substr(0, q);
        }
        u.path = std::string(rest);
    }
};

// Host of an absolute url, or empty.
inline std::string host_of(std::string_view url) {
    auto u = Url::parse(url);
    return u ? u->host : std::string();
}

// Approximate registrable domain: the last two labels, or three when the
// second-level label is a common public suffix component (co.uk, com.au, ...).
inline std::string registrable_domain(std::string_view host) {
    std::string h = text::to_lower_ascii(host);
    if (!h.empty() && h.back() == '.') h.pop_back();
    auto labels = text::split(h, '.');
    if (labels.size() <= 2) return h;
    static constexpr std::string_view kSecondLevel[] = {"co", "com", "net", "org", "gov", "ac", "edu"};
    size_t keep = 2;
    const auto& sld = labels[labels.size() - 2];
    if (labels.back().size() == 2 &&
        std::find(std::begin(kSecondLevel), std::end(kSecondLevel), sld) != std::end(kSecondLevel))
        keep = 3;
    std::vector<std::string> tail(labels.end() - static_cast<long>(std::min(keep, labels.size())),
                                  labels.end());
    return text::join(tail, ".");
}

inline std::string percent_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 15]);
        }
    }
    return out;
}

}  // namespace phishscope
