#pragma once

// Static evasion profiling: pattern rules over the raw page assign exactly
// one of five categories. Precedence when several fire:
// TextEncoding > BehavioralJS > DOMManipulation > Clickjacking > Regular.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phishscope/css.hpp"
#include "phishscope/encoding.hpp"
#include "phishscope/html.hpp"
#include "phishscope/parser.hpp"

namespace phishscope {

enum class EvasionCategory { Regular, BehavioralJS, Clickjacking, DOMManipulation, TextEncoding };

inline std::string_view to_string(EvasionCategory c) {
    switch (c) {
        case EvasionCategory::BehavioralJS: return "BehavioralJS";
        case EvasionCategory::Clickjacking: return "Clickjacking";
        case EvasionCategory::DOMManipulation: return "DOMManipulation";
        case EvasionCategory::TextEncoding: return "TextEncoding";
        default: return "Regular";
    }
}

inline std::optional<EvasionCategory> evasion_category_from_string(std::string_view s) {
    for (auto c : {EvasionCategory::Regular, EvasionCategory::BehavioralJS, EvasionCategory::Clickjacking,
                   EvasionCategory::DOMManipulation, EvasionCategory::TextEncoding})
        if (text::iequals(s, to_string(c))) return c;
    return std::nullopt;
}

inline int precedence(EvasionCategory c) {
    switch (c) {
        case EvasionCategory::TextEncoding: return 4;
        case EvasionCategory::BehavioralJS: return 3;
        case EvasionCategory::DOMManipulation: return 2;
        case EvasionCategory::Clickjacking: return 1;
        default: return 0;
    }
}

struct EvasionSignal {
    std::string id;
    EvasionCategory category = EvasionCategory::Regular;
    size_t begin = 0;  // byte span in the raw page
    size_t end = 0;
    std::string detail;

    bool operator==(const EvasionSignal&) const = default;
};

struct EvasionProfile {
    EvasionCategory category = EvasionCategory::Regular;
    std::vector<EvasionSignal> signals;

    nlohmann::json to_json() const {
        nlohmann::json sig = nlohmann::json::array();
        for (const auto& s : signals)
            sig.push_back({{"id", s.id}, {"category", to_string(s.category)}, {"span", {s.begin, s.end}}, {"detail", s.detail}});
        return {{"category", to_string(category)}, {"signals", sig}};
    }

    static EvasionProfile from_json(const nlohmann::json& j) {
        EvasionProfile p;
        p.category = evasion_category_from_string(j.at("category").get<std::string>()).value_or(EvasionCategory::Regular);
        for (const auto& s : j.at("signals"))
            p.signals.push_back({s.at("id").get<std::string>(),
                                 evasion_category_from_string(s.at("category").get<std::string>()).value_or(EvasionCategory::Regular),
                                 s.at("span")[0].get<size_t>(), s.at("span")[1].get<size_t>(), s.value("detail", "")});
        return p;
    }
};

inline constexpr double kScriptWhitespaceDensity = 0.40;
inline constexpr size_t kWhitespaceMinScript = 256;

namespace profile_detail {

inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

inline bool word_at(std::string_view s, size_t i, std::string_view w) {
    if (s.substr(i, w.size()) != w) return false;
    if (i > 0 && ident_char(s[i - 1]) && s[i - 1] != '.') return false;
    size_t e = i + w.size();
    return e >= s.size() || !ident_char(s[e]);
}

inline size_t skip_ws(std::string_view s, size_t i) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    return i;
}

// location = ..., location.href = ..., location.replace(...), location.assign(...)
inline bool has_navigation(std::string_view js) {
    for (size_t p = js.find("location"); p != std::string_view::npos; p = js.find("location", p + 1)) {
        if (p > 0 && ident_char(js[p - 1])) continue;
        size_t i = p + 8;
        if (i < js.size() && ident_char(js[i])) continue;
        if (js.substr(i, 5) == ".href") i += 5;
        else if (js.substr(i, 8) == ".replace" || js.substr(i, 7) == ".assign") return true;
        i = skip_ws(js, i);
        if (i < js.size() && js[i] == '=' && (i + 1 >= js.size() || js[i + 1] != '=')) return true;
    }
    return js.find("window.navigate(") != std::string_view::npos;
}

// Index of the ')' matching the '(' at `open`, skipping string literals.
inline size_t matching_paren(std::string_view s, size_t open) {
    int depth = 0;
    char quote = 0;
    for (size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'' || c == '`') quote = c;
        else if (c == '(') ++depth;
        else if (c == ')' && --depth == 0) return i;
    }
    return std::string_view::npos;
}

// Top-level comma positions inside (open, close).
inline std::vector<size_t> top_level_commas(std::string_view s, size_t open, size_t close) {
    std::vector<size_t> out;
    int depth = 0;
    char quote = 0;
    for (size_t i = open + 1; i < close; ++i) {
        char c = s[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'' || c == '`') quote = c;
        else if (c == '(' || c == '{' || c == '[') ++depth;
        else if (c == ')' || c == '}' || c == ']') --depth;
        else if (c == ',' && depth == 0) out.push_back(i);
    }
    return out;
}

// setTimeout/setInterval calls with a positive delay whose callback navigates.
inline std::optional<size_t> timer_redirect(std::string_view js) {
    for (std::string_view fn : {"setTimeout", "setInterval"}) {
        for (size_t p = js.find(fn); p != std::string_view::npos; p = js.find(fn, p + 1)) {
            if (!word_at(js, p, fn)) continue;
            size_t open = skip_ws(js, p + fn.size());
            if (open >= js.size() || js[open] != '(') continue;
            size_t close = matching_paren(js, open);
            if (close == std::string_view::npos) continue;
            auto commas = top_level_commas(js, open, close);
            if (commas.empty()) continue;
            auto callback = js.substr(open + 1, commas[0] - open - 1);
            auto delay = text::trim(js.substr(commas[0] + 1, (commas.size() > 1 ? commas[1] : close) - commas[0] - 1));
            long ms = 0;
            try {
                size_t used = 0;
                ms = std::stol(std::string(delay), &used);
                if (used != delay.size()) continue;
            } catch (...) {
                continue;
            }
            if (ms <= 0) continue;
            auto cb = text::trim(callback);
            bool bare_name = !cb.empty() && std::all_of(cb.begin(), cb.end(), [](char c) { return ident_char(c) || c == '.'; });
            if (has_navigation(callback) || (bare_name && has_navigation(js))) return p;
        }
    }
    return std::nullopt;
}

inline constexpr std::string_view kGatingEvents[] = {"mousemove", "mouseover", "mouseenter", "mousedown", "mouseup",
                                                     "click",     "keydown",   "keypress",   "touchstart", "scroll"};

// Position of an event-gated navigation in a script body.
inline std::optional<size_t> gated_navigation(std::string_view js) {
    for (auto ev : kGatingEvents) {
        std::string listener1 = "addEventListener(\"" + std::string(ev) + "\"";
        std::string listener2 = "addEventListener('" + std::string(ev) + "'";
        std::string prop = ".on" + std::string(ev);
        for (const auto& pat : {listener1, listener2, prop}) {
            size_t p = js.find(pat);
            if (p == std::string_view::npos) continue;
            if (pat == prop && (p + pat.size() < js.size() && ident_char(js[p + pat.size()]))) continue;
            if (has_navigation(js.substr(p))) return p;
        }
    }
    return std::nullopt;
}

inline constexpr std::string_view kDecodeFns[] = {"atob", "unescape", "decodeURIComponent", "decodeURI", "escape",
                                                  "String.fromCharCode"};

// Longest chain of directly nested decode calls, e.g. unescape(atob(...)) = 2.
inline int decode_chain_depth(std::string_view js) {
    auto call_at = [&](size_t i) -> size_t {  // returns index after '(' or npos
        for (auto fn : kDecodeFns) {
            if (js.substr(i, fn.size()) != fn) continue;
            if (i > 0 && ident_char(js[i - 1]) && fn != "String.fromCharCode") continue;
            size_t j = skip_ws(js, i + fn.size());
            if (j < js.size() && js[j] == '(') return j + 1;
        }
        return std::string_view::npos;
    };
    int best = 0;
    for (size_t i = 0; i < js.size(); ++i) {
        int depth = 0;
        size_t j = i;
        for (;;) {
            size_t next = call_at(j);
            if (next == std::string_view::npos) break;
            ++depth;
            j = skip_ws(js, next);
        }
        best = std::max(best, depth);
    }
    return best;
}

inline double whitespace_density(std::string_view s) {
    if (s.empty()) return 0.0;
    size_t ws = 0;
    for (char c : s) ws += text::is_space(c);
    return double(ws) / double(s.size());
}

inline std::optional<double> parse_number(std::string_view v) {
    v = text::trim(v);
    try {
        size_t used = 0;
        double d = std::stod(std::string(v), &used);
        return d;
    } catch (...) {
        return std::nullopt;
    }
}

inline bool is_full_viewport(const std::optional<std::string>& v) {
    if (!v) return false;
    auto t = text::to_lower_ascii(text::trim(*v));
    return t == "100%" || t == "100vw" || t == "100vh";
}

}  // namespace profile_detail

// Raw-page profile. `doc` supplies the interactive elements a clickjacking
// overlay would sit on.
inline EvasionProfile profile(std::string_view html, const ParsedDocument& doc) {
    using namespace profile_detail;
    EvasionProfile out;
    auto tree = html::parse_tree(html);
    auto fire = [&](std::string id, EvasionCategory c, size_t b, size_t e, std::string detail) {
        b = std::min(b, html.size());
        e = std::clamp(e, b, html.size());
        out.signals.push_back({std::move(id), c, b, e, std::move(detail)});
    };

    // stylesheet rules for iframe style resolution
    std::vector<css::Rule> rules;
    for (const auto& n : tree.nodes)
        if (n.type == html::Node::Type::element && n.tag == "style") {
            auto r = css::parse_stylesheet(n.text);
            rules.insert(rules.end(), r.begin(), r.end());
        }

    // ids of containers holding credential inputs or forms
    std::set<std::string> credential_ids;
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.type != html::Node::Type::element) continue;
        const auto* type = n.attr("type");
        bool cred = n.tag == "form" || (n.tag == "input" && type && text::iequals(text::trim(*type), "password"));
        if (!cred) continue;
        for (int p = static_cast<int>(i); p > 0; p = tree.nodes[p].parent)
            if (const auto* id = tree.nodes[p].attr("id"); id && !id->empty()) credential_ids.insert(*id);
    }

    bool interactive = false;
    for (const auto& e : doc.elements)
        interactive = interactive || e.kind == TagKind::button || e.kind == TagKind::input || e.kind == TagKind::a ||
                      e.kind == TagKind::form || e.kind == TagKind::area;

    for (const auto& n : tree.nodes) {
        if (n.type != html::Node::Type::element) continue;

        // inline event handlers
        for (const auto& a : n.attrs) {
            if (a.name.size() < 3 || a.name.compare(0, 2, "on") != 0) continue;
            std::string_view ev = std::string_view(a.name).substr(2);
            bool gating = std::find(std::begin(kGatingEvents), std::end(kGatingEvents), ev) != std::end(kGatingEvents);
            if (gating && has_navigation(a.value))
                fire("behavioral.handler_navigation", EvasionCategory::BehavioralJS, n.begin,
                     html::start_tag_end(html, n.begin), a.name + " navigates");
            if (ev == "beforeunload")
                fire("behavioral.popup_hook", EvasionCategory::BehavioralJS, n.begin, html::start_tag_end(html, n.begin),
                     "onbeforeunload handler");
        }

        if (n.tag == "script" && !n.has_attr("src")) {
            std::string_view js = n.text;
            if (auto p = gated_navigation(js))
                fire("behavioral.handler_navigation", EvasionCategory::BehavioralJS, n.begin, n.end, "event-gated redirect");
            if (auto p = timer_redirect(js))
                fire("behavioral.timer_redirect", EvasionCategory::BehavioralJS, n.begin, n.end, "delayed redirect");
            if (js.find("onbeforeunload") != std::string_view::npos ||
                js.find("\"beforeunload\"") != std::string_view::npos || js.find("'beforeunload'") != std::string_view::npos)
                fire("behavioral.popup_hook", EvasionCategory::BehavioralJS, n.begin, n.end, "beforeunload hook");
            else if (js.find("window.open(") != std::string_view::npos && has_navigation(js))
                fire("behavioral.popup_hook", EvasionCategory::BehavioralJS, n.begin, n.end, "popup chained to navigation");

            auto lower = text::to_lower_ascii(js);
            bool creates = lower.find("createelement(\"form\")") != std::string::npos ||
                           lower.find("createelement('form')") != std::string::npos ||
                           lower.find("createelement(\"input\")") != std::string::npos ||
                           lower.find("createelement('input')") != std::string::npos;
            bool writes = (lower.find("innerhtml") != std::string::npos || lower.find("outerhtml") != std::string::npos ||
                           lower.find("insertadjacenthtml") != std::string::npos ||
                           lower.find("document.write") != std::string::npos) &&
                          (lower.find("<form") != std::string::npos || lower.find("<input") != std::string::npos);
            if (creates || writes)
                fire("dom.script_form_creation", EvasionCategory::DOMManipulation, n.begin, n.end,
                     creates ? "createElement of form control" : "markup injection with form controls");
            bool toggles = js.find(".style.display") != std::string_view::npos ||
                           js.find("removeAttribute(\"hidden\")") != std::string_view::npos ||
                           js.find("removeAttribute('hidden')") != std::string_view::npos ||
                           js.find(".hidden = false") != std::string_view::npos ||
                           js.find(".hidden=false") != std::string_view::npos;
            if (toggles)
                for (const auto& id : credential_ids)
                    if (js.find("\"" + id + "\"") != std::string_view::npos || js.find("'" + id + "'") != std::string_view::npos ||
                        js.find("\"#" + id + "\"") != std::string_view::npos || js.find("'#" + id + "'") != std::string_view::npos) {
                        fire("dom.credential_toggle", EvasionCategory::DOMManipulation, n.begin, n.end,
                             "script toggles display of #" + id);
                        break;
                    }

            auto unwrapped = encoding::unwrap_script(text::trim(js));
            int depth = std::max(unwrapped.decode_depth, decode_chain_depth(js));
            if (depth >= 2)
                fire("encoding.nested_decode", EvasionCategory::TextEncoding, n.begin, n.end,
                     "decode chain depth " + std::to_string(depth));
            if (js.size() >= kWhitespaceMinScript && whitespace_density(js) > kScriptWhitespaceDensity)
                fire("encoding.whitespace_padding", EvasionCategory::TextEncoding, n.begin, n.end,
                     "whitespace density above 40%");
        }

        if (n.tag == "iframe") {
            std::vector<css::Declaration> decls;
            css::ElementKey key{n.tag, n.attr("class") ? std::string_view(*n.attr("class")) : std::string_view(),
                                n.attr("id") ? std::string_view(*n.attr("id")) : std::string_view()};
            for (const auto& r : rules)
                for (const auto& part : text::split(r.selector, ','))
                    if (auto sel = css::parse_simple_selector(part); sel && css::matches(*sel, key)) {
                        decls.insert(decls.end(), r.declarations.begin(), r.declarations.end());
                        break;
                    }
            if (const auto* st = n.attr("style")) {
                auto d = css::parse_declarations(*st);
                decls.insert(decls.end(), d.begin(), d.end());
            }
            auto opacity = css::last_value(decls, "opacity");
            auto visibility = css::last_value(decls, "visibility");
            auto z = css::last_value(decls, "z-index");
            bool invisible = (opacity && parse_number(*opacity) && *parse_number(*opacity) <= 0.0) ||
                             (visibility && text::iequals(text::trim(*visibility), "hidden"));
            bool on_top = z && parse_number(*z) && *parse_number(*z) > 0;
            if (invisible && on_top && interactive)
                fire("clickjacking.transparent_iframe", EvasionCategory::Clickjacking, n.begin, n.end,
                     "invisible iframe layered over the page");
            auto width = css::last_value(decls, "width");
            auto height = css::last_value(decls, "height");
            if (!width && n.attr("width")) width = *n.attr("width");
            if (!height && n.attr("height")) height = *n.attr("height");
            auto position = css::last_value(decls, "position");
            bool overlay = position && (text::iequals(text::trim(*position), "fixed") ||
                                        text::iequals(text::trim(*position), "absolute"));
            if (css::last_value(decls, "pointer-events") && overlay && is_full_viewport(width) && is_full_viewport(height))
                fire("clickjacking.pointer_events_overlay", EvasionCategory::Clickjacking, n.begin, n.end,
                     "full-viewport iframe with pointer-events override");
        }
    }

    // charset declaration that disagrees with the bytes
    if (auto decl = encoding::find_charset_declaration(html)) {
        bool valid = encoding::is_valid_utf8(html);
        bool ascii = encoding::is_ascii(html);
        const auto& cs = decl->charset;
        bool single_byte = cs == "iso-8859-1" || cs == "windows-1252" || cs == "us-ascii";
        if ((cs == "utf-8" && !valid) || (single_byte && valid && !ascii))
            fire("encoding.charset_mismatch", EvasionCategory::TextEncoding, decl->value_begin, decl->value_end,
                 "declared " + cs + " disagrees with content bytes");
    }

    std::stable_sort(out.signals.begin(), out.signals.end(),
                     [](const EvasionSignal& a, const EvasionSignal& b) { return a.begin < b.begin; });
    for (const auto& s : out.signals)
        if (precedence(s.category) > precedence(out.category)) out.category = s.category;
    return out;
}

inline EvasionProfile profile(std::string_view html) {
    return profile(html, parse_html(html, {}, PatchConfig::all_off()));
}

}  // namespace phishscope
