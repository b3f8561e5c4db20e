#pragma once

// Stylesheet extraction and the simple-selector matcher used for visibility.
// Only tag, .class, #id and tag.class / tag#id selectors participate;
// anything with combinators, attribute selectors or pseudo-classes is kept in
// the rule list but never matches.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishscope/core.hpp"

namespace phishscope::css {

struct Declaration {
    std::string property;  // lowercase
    std::string value;     // lowercase, whitespace collapsed, !important stripped
};

struct Rule {
    std::string selector;  // single selector (selector lists are split)
    std::vector<Declaration> declarations;
};

inline std::string strip_comments(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s.substr(i, 2) == "/*") {
            size_t end = s.find("*/", i + 2);
            i = end == std::string_view::npos ? s.size() : end + 2;
            out.push_back(' ');
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

// Parses `a: b; c: d`. Malformed declarations (no colon, empty name) are
// skipped.
inline std::vector<Declaration> parse_declarations(std::string_view block) {
    std::vector<Declaration> out;
    auto cleaned = strip_comments(block);
    for (const auto& part : text::split(cleaned, ';')) {
        auto colon = part.find(':');
        if (colon == std::string::npos) continue;
        auto prop = text::to_lower_ascii(text::trim(std::string_view(part).substr(0, colon)));
        if (prop.empty()) continue;
        bool ok = std::all_of(prop.begin(), prop.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
        });
        if (!ok) continue;
        auto value = text::to_lower_ascii(text::collapse_whitespace(std::string_view(part).substr(colon + 1)));
        if (auto bang = value.find("!important"); bang != std::string::npos) {
            value = std::string(text::trim(value.substr(0, bang)));
        }
        out.push_back({std::move(prop), std::move(value)});
    }
    return out;
}

// Value of the last declaration of `property`, if any.
inline std::optional<std::string> last_value(const std::vector<Declaration>& decls, std::string_view property) {
    std::optional<std::string> v;
    for (const auto& d : decls)
        if (d.property == property) v = d.value;
    return v;
}

inline bool sets_display_none(const std::vector<Declaration>& decls) {
    auto v = last_value(decls, "display");
    return v && *v == "none";
}

inline bool sets_display_none(std::string_view inline_style) {
    return sets_display_none(parse_declarations(inline_style));
}

// Extracts rules from one stylesheet body. At-rule blocks (@media, @supports,
// @font-face, ...) are skipped.
inline std::vector<Rule> parse_stylesheet(std::string_view sheet) {
    std::vector<Rule> rules;
    auto s = strip_comments(sheet);
    size_t i = 0;
    while (i < s.size()) {
        size_t open = s.find('{', i);
        if (open == std::string::npos) break;
        auto prelude = text::trim(std::string_view(s).substr(i, open - i));
        // matching close brace (nested for at-rules)
        int depth = 1;
        size_t j = open + 1;
        while (j < s.size() && depth > 0) {
            if (s[j] == '{') ++depth;
            if (s[j] == '}') --depth;
            ++j;
        }
        size_t close = depth == 0 ? j - 1 : s.size();
        if (!prelude.empty() && prelude.front() == '@') {
            i = j;
            continue;
        }
        // A stray statement ending in ';' before the prelude belongs to nothing.
        if (auto semi = prelude.rfind(';'); semi != std::string_view::npos) prelude = text::trim(prelude.substr(semi + 1));
        auto decls = parse_declarations(std::string_view(s).substr(open + 1, close - open - 1));
        for (const auto& sel : text::split(prelude, ',')) {
            auto trimmed = text::collapse_whitespace(sel);
            if (trimmed.empty()) continue;
            rules.push_back({trimmed, decls});
        }
        i = j;
    }
    return rules;
}

struct SimpleSelector {
    std::string tag;  // empty = any
    std::string cls;
    std::string id;
};

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
           static_cast<unsigned char>(c) >= 0x80;
}

// Parses the supported selector subset; nullopt for everything else.
inline std::optional<SimpleSelector> parse_simple_selector(std::string_view sel) {
    sel = text::trim(sel);
    if (sel.empty()) return std::nullopt;
    SimpleSelector out;
    size_t i = 0;
    size_t b = i;
    while (i < sel.size() && is_ident_char(sel[i])) ++i;
    out.tag = text::to_lower_ascii(sel.substr(b, i - b));
    if (i == sel.size()) return out.tag.empty() ? std::nullopt : std::optional(out);
    char kind = sel[i++];
    if (kind != '.' && kind != '#') return std::nullopt;
    b = i;
    while (i < sel.size() && is_ident_char(sel[i])) ++i;
    if (i != sel.size() || i == b) return std::nullopt;
    (kind == '.' ? out.cls : out.id) = std::string(sel.substr(b));
    return out;
}

struct ElementKey {
    std::string_view tag;
    std::string_view class_attr;  // raw class attribute (space separated)
    std::string_view id;
};

inline bool has_class(std::string_view class_attr, std::string_view cls) {
    size_t i = 0;
    while (i < class_attr.size()) {
        while (i < class_attr.size() && text::is_space(class_attr[i])) ++i;
        size_t b = i;
        while (i < class_attr.size() && !text::is_space(class_attr[i])) ++i;
        if (i > b && class_attr.substr(b, i - b) == cls) return true;
    }
    return false;
}

inline bool matches(const SimpleSelector& sel, const ElementKey& el) {
    if (!sel.tag.empty() && sel.tag != "*" && sel.tag != el.tag) return false;
    if (!sel.cls.empty() && !has_class(el.class_attr, sel.cls)) return false;
    if (!sel.id.empty() && sel.id != el.id) return false;
    return true;
}

// Pre-parsed index of the rules that hide elements. Built once per document.
class HidingIndex {
public:
    explicit HidingIndex(const std::vector<Rule>& rules) {
        for (const auto& r : rules) {
            if (!sets_display_none(r.declarations)) continue;
            if (auto sel = parse_simple_selector(r.selector)) selectors_.push_back(std::move(*sel));
        }
    }

    bool hides(const ElementKey& el) const {
        for (const auto& s : selectors_)
            if (matches(s, el)) return true;
        return false;
    }

    bool empty() const { return selectors_.empty(); }

private:
    std::vector<SimpleSelector> selectors_;
};

}  // namespace phishscope::css
