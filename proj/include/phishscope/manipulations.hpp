#pragma once

// Problem-space manipulations A1..A15. Each one edits raw HTML so the page
// still renders the same and its credential sinks still work at runtime.
// A manipulation whose precondition fails returns the input unchanged with a
// note.

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "phishscope/core.hpp"
#include "phishscope/encoding.hpp"
#include "phishscope/html.hpp"
#include "phishscope/parser.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

enum class ManipulationId { A1 = 1, A2, A3, A4, A5, A6, A7, A8, A9, A10, A11, A12, A13, A14, A15 };

enum class RoundClass { SR, MR };

enum class HidingStrategy { S1, S2, S3, S4 };

struct ManipulationInfo {
    ManipulationId id;
    std::string_view code;
    std::string_view name;
    std::string_view summary;
};

inline const std::array<ManipulationInfo, 15>& manipulation_catalog() {
    static const std::array<ManipulationInfo, 15> kCatalog = {{
        {ManipulationId::A1, "A1", "InjectIntElem",
         "Appends `count` hidden anchors pointing inside the page (href=\"#local\") to the body."},
        {ManipulationId::A2, "A2", "InjectIntElemFoot",
         "Like A1 but inside the last <footer>; a hidden footer is created when the page has none."},
        {ManipulationId::A3, "A3", "InjectIntLinkElem",
         "Appends `count` hidden paragraphs, each wrapping a same-site path link."},
        {ManipulationId::A4, "A4", "InjectExtElem",
         "Appends `count` hidden anchors to well-known external hosts."},
        {ManipulationId::A5, "A5", "InjectExtElemFoot", "Like A4 but inside the footer (created hidden if missing)."},
        {ManipulationId::A6, "A6", "UpdateForm",
         "Sets every form action to \"#!\" and adds a load-time script restoring the original action."},
        {ManipulationId::A7, "A7", "ObfuscateExtLinks",
         "Sets external anchor hrefs to \"#!\" and adds a load-time script restoring them."},
        {ManipulationId::A8, "A8", "ObfuscateJS",
         "Replaces each inline script body with a Base64 decode-and-eval wrapper of the original code."},
        {ManipulationId::A9, "A9", "InjectFakeCopyright", "Appends a hidden copyright paragraph."},
        {ManipulationId::A10, "A10", "UpdateIntAnchors",
         "Sets same-site anchor hrefs to \"#!\" and adds a load-time script restoring them."},
        {ManipulationId::A11, "A11", "UpdateHiddenDivs",
         "Swaps the hiding mechanism of hidden divs (hidden attribute <-> inline display:none) and injects "
         "`count` hidden divs with filler content."},
        {ManipulationId::A12, "A12", "UpdateHiddenButtons",
         "Removes `disabled` from buttons and adds a script that re-applies it with setAttribute()."},
        {ManipulationId::A13, "A13", "UpdateHiddenInputs",
         "Turns type=hidden inputs into type=text inputs carrying the hidden attribute."},
        {ManipulationId::A14, "A14", "UpdateTitle", "Adds a script assigning a decoy document.title."},
        {ManipulationId::A15, "A15", "UpdateIFrames",
         "Swaps the hiding mechanism of hidden iframes and injects `count` hidden iframes to benign embeds."},
    }};
    return kCatalog;
}

inline const ManipulationInfo& info(ManipulationId id) { return manipulation_catalog()[static_cast<size_t>(id) - 1]; }

inline std::string_view to_string(ManipulationId id) { return info(id).code; }

inline std::optional<ManipulationId> manipulation_from_string(std::string_view s) {
    for (const auto& m : manipulation_catalog())
        if (text::iequals(s, m.code) || text::iequals(s, m.name)) return m.id;
    return std::nullopt;
}

inline std::string_view to_string(HidingStrategy s) {
    static constexpr std::string_view kNames[] = {"S1", "S2", "S3", "S4"};
    return kNames[static_cast<int>(s)];
}

inline std::optional<HidingStrategy> hiding_strategy_from_string(std::string_view s) {
    for (int i = 0; i < 4; ++i)
        if (text::iequals(s, to_string(static_cast<HidingStrategy>(i)))) return static_cast<HidingStrategy>(i);
    return std::nullopt;
}

struct ManipulationParams {
    size_t count = 3;
    HidingStrategy strategy = HidingStrategy::S1;
    uint64_t seed = 0;
};

struct ManipulationResult {
    std::string html;
    bool applied = false;
    std::string note;
};

namespace manip {

struct Edit {
    size_t pos;
    size_t len;
    std::string text;
};

inline std::string apply_edits(std::string_view src, std::vector<Edit> edits) {
    std::stable_sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.pos < b.pos; });
    std::string out;
    out.reserve(src.size() + 256);
    size_t cursor = 0;
    for (const auto& e : edits) {
        if (e.pos < cursor) continue;  // overlapping edit; first one wins
        out.append(src.substr(cursor, e.pos - cursor));
        out += e.text;
        cursor = e.pos + e.len;
    }
    out.append(src.substr(std::min(cursor, src.size())));
    return out;
}

using html::start_tag_end;

inline std::string render_start_tag(const html::Node& n, bool self_closing = false) {
    std::string out = "<" + n.tag;
    for (const auto& a : n.attrs) {
        out += " " + a.name;
        if (!a.value.empty()) out += "=\"" + escape_markup(a.value, true) + "\"";
        else if (a.name != "hidden" && a.name != "disabled") out += "=\"\"";
    }
    out += self_closing ? " />" : ">";
    return out;
}

inline size_t rfind_ci(std::string_view hay, std::string_view needle) {
    if (needle.size() > hay.size()) return std::string_view::npos;
    for (size_t i = hay.size() - needle.size() + 1; i-- > 0;)
        if (text::iequals(hay.substr(i, needle.size()), needle)) return i;
    return std::string_view::npos;
}

// Just before </body>, else before </html>, else the end.
inline size_t body_insert_pos(std::string_view src) {
    if (auto p = rfind_ci(src, "</body"); p != std::string_view::npos) return p;
    if (auto p = rfind_ci(src, "</html"); p != std::string_view::npos) return p;
    return src.size();
}

inline size_t head_insert_pos(std::string_view src) {
    if (auto p = text::ifind(src, "</head", 0); p != std::string_view::npos) return p;
    return 0;
}

inline bool safe_js_literal(std::string_view v) {
    for (char c : v)
        if (c == '"' || c == '\'' || c == '\\' || static_cast<unsigned char>(c) < 0x20) return false;
    return text::ifind(v, "</script", 0) == std::string_view::npos;
}

struct Context {
    std::string_view src;
    std::string_view url;
    html::Tree tree;
    std::mt19937_64 rng;
    std::set<std::string> ids;
    std::string hide_class;
    std::vector<Edit> edits;
    std::vector<std::string> script_statements;  // restoring statements, emitted as one script

    Context(std::string_view s, std::string_view u, uint64_t seed) : src(s), url(u), tree(html::parse_tree(s)), rng(seed) {
        for (const auto& n : tree.nodes)
            if (const auto* id = n.attr("id")) ids.insert(*id);
    }

    std::vector<int> elements(std::string_view tag) const {
        std::vector<int> out;
        for (size_t i = 0; i < tree.nodes.size(); ++i)
            if (tree.nodes[i].type == html::Node::Type::element && tree.nodes[i].tag == tag) out.push_back(static_cast<int>(i));
        return out;
    }

    bool inside(int idx, std::string_view tag) const {
        for (int p = tree.nodes[idx].parent; p > 0; p = tree.nodes[p].parent)
            if (tree.nodes[p].tag == tag) return true;
        return false;
    }

    std::string fresh_token(std::string_view prefix) {
        for (;;) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%06llx", static_cast<unsigned long long>(rng() & 0xFFFFFF));
            std::string t = std::string(prefix) + buf;
            if (src.find(t) == std::string_view::npos && !ids.count(t)) {
                ids.insert(t);
                return t;
            }
        }
    }

    // Element id usable by a restoring script: an existing unique id, or a new one.
    std::optional<std::string> script_id(const html::Node& n, bool& needs_id) {
        needs_id = false;
        if (const auto* id = n.attr("id")) {
            size_t uses = 0;
            for (const auto& m : tree.nodes)
                if (const auto* other = m.attr("id"); other && *other == *id) ++uses;
            if (uses != 1 || !safe_js_literal(*id) || id->empty() || id->find(' ') != std::string::npos)
                return std::nullopt;
            return *id;
        }
        needs_id = true;
        return fresh_token("ps");
    }

    void replace_start_tag(int idx, const html::Node& updated) {
        const auto& n = tree.nodes[idx];
        size_t end = start_tag_end(src, n.begin);
        bool self_closing = end >= 2 && src[end - 2] == '/';
        edits.push_back({n.begin, end - n.begin, render_start_tag(updated, self_closing)});
    }

    void insert_body(std::string markup) { edits.push_back({body_insert_pos(src), 0, std::move(markup)}); }

    // `<tag attrs>inner</tag>` hidden with the requested strategy.
    std::string hidden(std::string_view tag, std::string_view attrs, std::string_view inner, HidingStrategy s) {
        std::string open = "<" + std::string(tag);
        switch (s) {
            case HidingStrategy::S1: open += " hidden"; break;
            case HidingStrategy::S2: open += " style=\"display:none\""; break;
            case HidingStrategy::S3:
                if (hide_class.empty()) {
                    hide_class = fresh_token("h");
                    edits.push_back({head_insert_pos(src), 0, "<style>." + hide_class + "{display:none}</style>"});
                }
                open += " class=\"" + hide_class + "\"";
                break;
            case HidingStrategy::S4: break;
        }
        if (!attrs.empty()) open += " " + std::string(attrs);
        open += ">";
        std::string el = open;
        if (!html::is_void_element(tag)) el += std::string(inner) + "</" + std::string(tag) + ">";
        if (s == HidingStrategy::S4) return "<noscript>" + el + "</noscript>";
        return el;
    }

    std::string finish() {
        if (!script_statements.empty()) {
            std::string body = "window.addEventListener(\"load\", function() { ";
            for (const auto& s : script_statements) body += s + " ";
            body += "});";
            insert_body("<script>" + body + "</script>");
        }
        return apply_edits(src, edits);
    }
};

inline std::string site_host(std::string_view url) { return host_of(url); }

inline bool is_external_href(std::string_view href, std::string_view page_url) {
    auto base = Url::parse(page_url);
    if (!base) return Url::parse(href).has_value() && !host_of(href).empty();
    auto r = base->resolve(href);
    if (!r || (r->scheme != "http" && r->scheme != "https") || r->host.empty()) return false;
    return registrable_domain(r->host) != registrable_domain(base->host);
}

inline bool is_internal_href(std::string_view href, std::string_view page_url) {
    if (is_sink_token(href)) return false;
    auto lower = text::to_lower_ascii(text::trim(href));
    if (text::istarts_with(lower, "mailto:") || text::istarts_with(lower, "tel:") || text::istarts_with(lower, "data:"))
        return false;
    if (Url::parse(href)) {
        auto base = Url::parse(page_url);
        return base && !host_of(href).empty() && registrable_domain(host_of(href)) == registrable_domain(base->host);
    }
    return true;  // relative reference
}

constexpr std::string_view kInternalWords[] = {"home",    "about us", "privacy policy", "contact",    "careers",
                                               "blog",    "help",     "terms of use",   "newsroom",   "support",
                                               "sitemap", "faq",      "accessibility",  "our team",   "locations"};
constexpr std::string_view kInternalPaths[] = {"/about", "/privacy", "/contact", "/careers", "/blog",
                                               "/help",  "/terms",   "/news",    "/support", "/sitemap"};
constexpr std::string_view kExternalLinks[] = {
    "https://en.wikipedia.org/wiki/Main_Page", "https://github.com/",         "https://www.youtube.com/",
    "https://www.linkedin.com/",               "https://www.mozilla.org/",    "https://www.w3.org/",
    "https://www.bbc.co.uk/news",              "https://developer.apple.com/", "https://www.nytimes.com/"};
constexpr std::string_view kEmbeds[] = {"https://www.youtube.com/embed/dQw4w9WgXcQ",
                                        "https://www.openstreetmap.org/export/embed.html",
                                        "https://player.vimeo.com/video/76979871"};
constexpr std::string_view kDecoyTitles[] = {"Weekly Recipes", "Garden Planner", "Local Weather",
                                             "Photography Tips", "Community Library"};
constexpr std::string_view kFiller[] = {
    "Thanks for visiting our community pages.", "Read our latest updates from the team.",
    "We care about your privacy and accessibility.", "Opening hours may vary on public holidays.",
    "Subscribe to the newsletter for seasonal news."};

template <size_t N>
std::string_view pick(std::mt19937_64& rng, const std::string_view (&arr)[N]) {
    return arr[rng() % N];
}

// Injection into the footer: before </footer> of the last footer, or a new
// hidden footer at the end of the body.
inline void inject_footer(Context& ctx, const std::string& markup, HidingStrategy s) {
    auto footers = ctx.elements("footer");
    if (!footers.empty()) {
        const auto& f = ctx.tree.nodes[footers.back()];
        auto region = ctx.src.substr(0, f.end);
        size_t close = rfind_ci(region, "</footer");
        size_t pos = close != std::string_view::npos && close > f.begin ? close : f.end;
        ctx.edits.push_back({pos, 0, markup});
        return;
    }
    ctx.insert_body(ctx.hidden("footer", "", markup, s));
}

inline ManipulationResult no_op(std::string_view html, std::string note) {
    return {std::string(html), false, std::move(note)};
}

inline bool is_js_script(const html::Node& n) {
    if (n.has_attr("src")) return false;
    const auto* type = n.attr("type");
    if (!type) return true;
    auto t = text::to_lower_ascii(text::trim(*type));
    return t.empty() || t == "text/javascript" || t == "application/javascript";
}

// Rewrites href/action of the selected elements to "#!" with a restoring
// script; shared by A6, A7 and A10.
template <typename Select>
ManipulationResult rebind(std::string_view html, Context& ctx, std::string_view tag, std::string_view attr,
                          Select select) {
    size_t changed = 0;
    for (int idx : ctx.elements(tag)) {
        const auto& n = ctx.tree.nodes[idx];
        if (ctx.inside(idx, "noscript") || ctx.inside(idx, "template")) continue;
        const auto* current = n.attr(attr);
        if (!select(current)) continue;
        if (current && !safe_js_literal(*current)) continue;
        bool needs_id = false;
        auto id = ctx.script_id(n, needs_id);
        if (!id) continue;
        html::Node updated = n;
        bool found = false;
        for (auto& a : updated.attrs)
            if (a.name == attr) {
                a.value = "#!";
                found = true;
            }
        if (!found) updated.attrs.push_back({std::string(attr), "#!"});
        if (needs_id) updated.attrs.push_back({"id", *id});
        ctx.replace_start_tag(idx, updated);
        std::string target = "document.getElementById(\"" + *id + "\")";
        if (current)
            ctx.script_statements.push_back(target + ".setAttribute(\"" + std::string(attr) + "\", \"" + *current + "\");");
        else
            ctx.script_statements.push_back(target + ".removeAttribute(\"" + std::string(attr) + "\");");
        ++changed;
    }
    if (!changed) return no_op(html, "no eligible <" + std::string(tag) + "> elements");
    return {ctx.finish(), true, std::to_string(changed) + " element(s) rebound"};
}

// Swap hidden <-> inline display:none on elements of `tag` hidden by either.
inline size_t swap_hiding(Context& ctx, std::string_view tag) {
    size_t swapped = 0;
    for (int idx : ctx.elements(tag)) {
        const auto& n = ctx.tree.nodes[idx];
        const auto* style = n.attr("style");
        bool inline_none = style && css::sets_display_none(*style);
        html::Node updated = n;
        if (n.has_attr("hidden")) {
            updated.attrs.erase(std::remove_if(updated.attrs.begin(), updated.attrs.end(),
                                               [](const html::Attribute& a) { return a.name == "hidden"; }),
                                updated.attrs.end());
            bool has_style = false;
            for (auto& a : updated.attrs)
                if (a.name == "style") {
                    a.value = std::string(text::trim(a.value));
                    if (!a.value.empty() && a.value.back() != ';') a.value += ";";
                    a.value += "display:none";
                    has_style = true;
                }
            if (!has_style) updated.attrs.push_back({"style", "display:none"});
        } else if (inline_none) {
            updated.attrs.push_back({"hidden", ""});
        } else {
            continue;
        }
        ctx.replace_start_tag(idx, updated);
        ++swapped;
    }
    return swapped;
}

}  // namespace manip

inline ManipulationResult apply_manipulation(std::string_view html, ManipulationId id,
                                             const ManipulationParams& params = {}, std::string_view page_url = {}) {
    using namespace manip;
    Context ctx(html, page_url, params.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(id));
    const auto S = params.strategy;
    switch (id) {
        case ManipulationId::A1:
        case ManipulationId::A2: {
            std::string markup;
            for (size_t i = 0; i < params.count; ++i)
                markup += ctx.hidden("a", "href=\"#local\"", pick(ctx.rng, kInternalWords), S);
            if (id == ManipulationId::A1) ctx.insert_body(markup);
            else inject_footer(ctx, markup, S);
            return {ctx.finish(), params.count > 0, std::to_string(params.count) + " internal element(s)"};
        }
        case ManipulationId::A3: {
            std::string markup;
            for (size_t i = 0; i < params.count; ++i) {
                std::string link = "<a href=\"" + std::string(pick(ctx.rng, kInternalPaths)) + "\">" +
                                   std::string(pick(ctx.rng, kInternalWords)) + "</a>";
                markup += ctx.hidden("p", "", link, S);
            }
            ctx.insert_body(markup);
            return {ctx.finish(), params.count > 0, std::to_string(params.count) + " link element(s)"};
        }
        case ManipulationId::A4:
        case ManipulationId::A5: {
            std::string markup;
            for (size_t i = 0; i < params.count; ++i)
                markup += ctx.hidden("a", "href=\"" + std::string(pick(ctx.rng, kExternalLinks)) + "\"",
                                     pick(ctx.rng, kInternalWords), S);
            if (id == ManipulationId::A4) ctx.insert_body(markup);
            else inject_footer(ctx, markup, S);
            return {ctx.finish(), params.count > 0, std::to_string(params.count) + " external element(s)"};
        }
        case ManipulationId::A6:
            return rebind(html, ctx, "form", "action", [](const std::string*) { return true; });
        case ManipulationId::A7:
            return rebind(html, ctx, "a", "href", [&](const std::string* href) {
                return href && is_external_href(*href, page_url);
            });
        case ManipulationId::A10:
            return rebind(html, ctx, "a", "href", [&](const std::string* href) {
                return href && is_internal_href(*href, page_url) && text::trim(*href) != "#!";
            });
        case ManipulationId::A8: {
            size_t wrapped = 0;
            for (int idx : ctx.elements("script")) {
                const auto& n = ctx.tree.nodes[idx];
                if (!is_js_script(n) || text::trim(n.text).empty()) continue;
                size_t body_begin = start_tag_end(html, n.begin);
                if (html.substr(body_begin, n.text.size()) != n.text) continue;
                std::string b64 = base64::encode(n.text);
                std::string wrapper = encoding::is_ascii(n.text)
                                          ? "eval(atob(\"" + b64 + "\"))"
                                          : "eval(decodeURIComponent(escape(atob(\"" + b64 + "\"))))";
                ctx.edits.push_back({body_begin, n.text.size(), wrapper});
                ++wrapped;
            }
            if (!wrapped) return no_op(html, "no inline scripts");
            return {ctx.finish(), true, std::to_string(wrapped) + " script(s) wrapped"};
        }
        case ManipulationId::A9: {
            std::string brand = "Company";
            if (auto host = site_host(page_url); !host.empty()) {
                auto label = text::split(registrable_domain(host), '.').front();
                if (!label.empty()) {
                    brand = label;
                    brand[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(brand[0])));
                }
            }
            ctx.insert_body(ctx.hidden("p", "", "\xC2\xA9 2024 " + brand + ". All rights reserved.", S));
            return {ctx.finish(), true, "copyright injected"};
        }
        case ManipulationId::A11: {
            size_t swapped = swap_hiding(ctx, "div");
            std::string markup;
            for (size_t i = 0; i < params.count; ++i) {
                std::string inner = "<p>" + std::string(pick(ctx.rng, kFiller)) + "</p><a href=\"" +
                                    std::string(pick(ctx.rng, kInternalPaths)) + "\">" +
                                    std::string(pick(ctx.rng, kInternalWords)) + "</a>";
                markup += ctx.hidden("div", "", inner, S);
            }
            ctx.insert_body(markup);
            return {ctx.finish(), swapped + params.count > 0,
                    std::to_string(swapped) + " swapped, " + std::to_string(params.count) + " injected"};
        }
        case ManipulationId::A12: {
            size_t changed = 0;
            for (int idx : ctx.elements("button")) {
                const auto& n = ctx.tree.nodes[idx];
                if (!n.has_attr("disabled")) continue;
                bool needs_id = false;
                auto bid = ctx.script_id(n, needs_id);
                if (!bid) continue;
                html::Node updated = n;
                updated.attrs.erase(std::remove_if(updated.attrs.begin(), updated.attrs.end(),
                                                   [](const html::Attribute& a) { return a.name == "disabled"; }),
                                    updated.attrs.end());
                if (needs_id) updated.attrs.push_back({"id", *bid});
                ctx.replace_start_tag(idx, updated);
                ctx.script_statements.push_back("document.getElementById(\"" + *bid +
                                                "\").setAttribute(\"disabled\", \"\");");
                ++changed;
            }
            if (!changed) return no_op(html, "no disabled buttons");
            return {ctx.finish(), true, std::to_string(changed) + " button(s)"};
        }
        case ManipulationId::A13: {
            size_t changed = 0;
            for (int idx : ctx.elements("input")) {
                const auto& n = ctx.tree.nodes[idx];
                const auto* type = n.attr("type");
                if (!type || !text::iequals(text::trim(*type), "hidden")) continue;
                html::Node updated = n;
                for (auto& a : updated.attrs)
                    if (a.name == "type") a.value = "text";
                if (!n.has_attr("hidden")) updated.attrs.push_back({"hidden", ""});
                ctx.replace_start_tag(idx, updated);
                ++changed;
            }
            if (!changed) return no_op(html, "no hidden inputs");
            return {ctx.finish(), true, std::to_string(changed) + " input(s)"};
        }
        case ManipulationId::A14: {
            ctx.insert_body("<script>document.title = \"" + std::string(pick(ctx.rng, kDecoyTitles)) + "\";</script>");
            return {ctx.finish(), true, "decoy title script"};
        }
        case ManipulationId::A15: {
            size_t swapped = swap_hiding(ctx, "iframe");
            std::string markup;
            for (size_t i = 0; i < params.count; ++i)
                markup += ctx.hidden("iframe", "src=\"" + std::string(pick(ctx.rng, kEmbeds)) + "\"", "", S);
            ctx.insert_body(markup);
            return {ctx.finish(), swapped + params.count > 0,
                    std::to_string(swapped) + " swapped, " + std::to_string(params.count) + " injected"};
        }
    }
    return no_op(html, "unknown manipulation");
}

// Static restore simulation: form submission targets after every load-time
// rebinding script has run (decode wrappers are unwrapped first). Sorted.
inline std::vector<std::string> runtime_form_sinks(std::string_view raw_html, std::string_view page_url) {
    auto text = normalize_encodings(raw_html).text;
    auto tree = html::parse_tree(text);
    detail::Rebindings rebindings;
    for (const auto& n : tree.nodes)
        if (n.type == html::Node::Type::element && n.tag == "script" && !n.has_attr("src"))
            detail::parse_rebinding_script(n.text, rebindings);
    auto base = Url::parse(page_url);
    std::vector<std::string> sinks;
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.type != html::Node::Type::element || n.tag != "form") continue;
        bool inert = false;
        for (int p = n.parent; p > 0; p = tree.nodes[p].parent)
            inert = inert || tree.nodes[p].tag == "noscript" || tree.nodes[p].tag == "template";
        if (inert) continue;
        std::optional<std::string> action;
        if (const auto* a = n.attr("action")) action = *a;
        if (const auto* id = n.attr("id")) {
            if (auto it = rebindings.find(*id); it != rebindings.end()) {
                if (auto jt = it->second.find("action"); jt != it->second.end()) action = jt->second;
            }
        }
        std::string target = action ? std::string(text::trim(*action)) : std::string();
        if (base) {
            if (auto r = base->resolve(target)) target = r->to_string();
        }
        sinks.push_back(target);
    }
    std::sort(sinks.begin(), sinks.end());
    return sinks;
}

inline std::string attack_catalog_markdown() {
    std::string out = "# Attack catalog\n\n| id | name | behaviour |\n|----|------|-----------|\n";
    for (const auto& m : manipulation_catalog())
        out += "| " + std::string(m.code) + " | " + std::string(m.name) + " | " + std::string(m.summary) + " |\n";
    out += "\nHiding strategies: S1 `hidden` attribute (default), S2 inline `display:none`, "
           "S3 class plus a `<style>` rule, S4 `<noscript>` wrapper.\n";
    return out;
}

}  // namespace phishscope
