#pragma once

// Raw HTML -> ordered list of actionable elements (the only thing a scorer
// ever sees), with the visibility / form-action / title hardening patches.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "phishscope/core.hpp"
#include "phishscope/css.hpp"
#include "phishscope/encoding.hpp"
#include "phishscope/html.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

enum class TagKind { h1, h2, h3, p, a, ul, ol, li, form, title, footer, script, input, button, iframe, meta, map, area };

inline constexpr TagKind kAllTagKinds[] = {
    TagKind::h1,     TagKind::h2,    TagKind::h3,    TagKind::p,      TagKind::a,      TagKind::ul,
    TagKind::ol,     TagKind::li,    TagKind::form,  TagKind::title,  TagKind::footer, TagKind::script,
    TagKind::input,  TagKind::button, TagKind::iframe, TagKind::meta, TagKind::map,    TagKind::area};

inline std::string_view to_string(TagKind k) {
    static constexpr std::string_view kNames[] = {"h1",     "h2",    "h3",     "p",      "a",      "ul",
                                                  "ol",     "li",    "form",   "title",  "footer", "script",
                                                  "input",  "button", "iframe", "meta",  "map",    "area"};
    return kNames[static_cast<int>(k)];
}

inline std::optional<TagKind> tag_kind_from_string(std::string_view s) {
    for (auto k : kAllTagKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

struct ElementAttribute {
    std::string name;
    std::string value;
    bool operator==(const ElementAttribute&) const = default;
};

struct SourceSpan {
    size_t begin = 0;
    size_t end = 0;
    bool operator==(const SourceSpan&) const = default;
};

struct ParsedElement {
    TagKind kind = TagKind::p;
    std::string text;  // lowercase; script bodies truncated for display
    std::vector<ElementAttribute> attributes;
    SourceSpan source_span;
    bool visible = true;
    size_t order_index = 0;
    std::string script_body;  // full inline script body (scripts only)
    std::string dom_id;       // id attribute, kept for locators and rebinding

    bool empty() const {
        if (!text.empty()) return false;
        for (const auto& a : attributes)
            if (!a.value.empty()) return false;
        return true;
    }

    const std::string* attribute(std::string_view name) const {
        for (const auto& a : attributes)
            if (a.name == name) return &a.value;
        return nullptr;
    }
};

struct PatchTraceEntry {
    std::string patch_id;
    size_t count = 0;
    bool operator==(const PatchTraceEntry&) const = default;
};

struct ParsedDocument {
    std::vector<ParsedElement> elements;
    std::string url;
    std::vector<css::Rule> stylesheet_rules;
    std::vector<PatchTraceEntry> patch_trace;

    size_t trace_count(std::string_view patch) const {
        for (const auto& e : patch_trace)
            if (e.patch_id == patch) return e.count;
        return 0;
    }
};

enum class ActionProbeMode { syntactic, network };

// Network probe used by the form-action patch in network mode. Returns
// true/false for a definite answer and nullopt on timeout or transport error.
using ActionProbe = std::function<std::optional<bool>(const std::string& url, std::chrono::milliseconds timeout)>;

struct PatchConfig {
    bool p1_hidden_attr = true;             // hidden attribute + inline display:none
    bool p2_css_display_none = true;        // <style> rules with display:none
    bool p3_form_action_validation = true;  // sink detection + late-rebinding folding
    bool p4_1_encoding_normalization = true;
    bool p6_title_script_guard = true;
    ActionProbeMode action_probe_mode = ActionProbeMode::syntactic;
    std::chrono::milliseconds probe_timeout{3000};
    ActionProbe probe;

    static PatchConfig all_off() {
        PatchConfig c;
        c.p1_hidden_attr = c.p2_css_display_none = c.p3_form_action_validation = false;
        c.p4_1_encoding_normalization = c.p6_title_script_guard = false;
        return c;
    }
};

inline constexpr std::string_view kEmptyMarker = "<EMPTY>";
inline constexpr std::string_view kSuspiciousSink = "SUSPICIOUS_SINK";
inline constexpr size_t kScriptDisplayLimit = 512;

enum class FormActionVerdict { ExternalValid, InternalSection, Suspicious };

inline std::string_view to_string(FormActionVerdict v) {
    switch (v) {
        case FormActionVerdict::ExternalValid: return "ExternalValid";
        case FormActionVerdict::InternalSection: return "InternalSection";
        case FormActionVerdict::Suspicious: return "Suspicious";
    }
    return "Suspicious";
}

inline bool is_sink_token(std::string_view value) {
    auto v = text::trim(value);
    if (v.empty() || v.front() == '#') return true;
    return text::istarts_with(v, "javascript:");
}

inline FormActionVerdict validate_form_action(std::string_view action_value, std::string_view base_url,
                                              ActionProbeMode mode = ActionProbeMode::syntactic,
                                              const ActionProbe& probe = {},
                                              std::chrono::milliseconds timeout = std::chrono::milliseconds(3000)) {
    if (is_sink_token(action_value)) return FormActionVerdict::InternalSection;
    auto base = Url::parse(base_url);
    if (!base || !base->has_authority()) base = Url::parse("http://localhost/");
    auto resolved = base->resolve(action_value);
    if (!resolved || !resolved->has_authority()) return FormActionVerdict::Suspicious;
    if (mode == ActionProbeMode::network && probe) {
        auto ok = probe(resolved->to_string(), timeout);
        if (ok.has_value() && !*ok) return FormActionVerdict::Suspicious;
    }
    return FormActionVerdict::ExternalValid;
}

inline const std::vector<std::string_view>& relevant_attributes(TagKind kind) {
    static const std::vector<std::string_view> kNone;
    static const std::vector<std::string_view> kA = {"href"};
    static const std::vector<std::string_view> kForm = {"action", "method"};
    static const std::vector<std::string_view> kInput = {"type", "name", "placeholder"};
    static const std::vector<std::string_view> kMeta = {"http-equiv", "content", "name"};
    static const std::vector<std::string_view> kSrc = {"src"};
    static const std::vector<std::string_view> kButton = {"type"};
    switch (kind) {
        case TagKind::a:
        case TagKind::area: return kA;
        case TagKind::form: return kForm;
        case TagKind::input: return kInput;
        case TagKind::meta: return kMeta;
        case TagKind::iframe:
        case TagKind::script: return kSrc;
        case TagKind::button: return kButton;
        default: return kNone;
    }
}

// Visibility of one element considered on its own (ancestors not included):
// false iff it carries `hidden`, an inline display:none, or a matching
// stylesheet rule sets display:none.
inline bool resolve_visibility(const html::Node& element, std::string_view inline_style,
                               const css::HidingIndex& stylesheet) {
    if (element.has_attr("hidden")) return false;
    if (css::sets_display_none(inline_style)) return false;
    const auto* cls = element.attr("class");
    const auto* id = element.attr("id");
    return !stylesheet.hides({element.tag, cls ? std::string_view(*cls) : std::string_view(),
                              id ? std::string_view(*id) : std::string_view()});
}

inline bool resolve_visibility(const html::Node& element, std::string_view inline_style,
                               const std::vector<css::Rule>& rules) {
    return resolve_visibility(element, inline_style, css::HidingIndex(rules));
}

namespace detail {

// id -> attribute -> value (nullopt = removed)
using Rebindings = std::map<std::string, std::map<std::string, std::optional<std::string>>>;

// Splits on ';' outside string literals.
inline std::vector<std::string> split_statements(std::string_view s) {
    std::vector<std::string> out(1);
    char quote = 0;
    for (char c : s) {
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == ';') {
            out.emplace_back();
            continue;
        }
        out.back().push_back(c);
    }
    return out;
}

// Recognizes scripts made only of statements that re-point an element's
// action/href once the page loads, e.g.
//   document.getElementById("f").setAttribute("action", "https://x/y");
// optionally inside a load/DOMContentLoaded handler or an IIFE.
inline bool parse_rebinding_script(std::string_view body, Rebindings& out) {
    if (body.find("getElementById") == std::string_view::npos &&
        body.find("querySelector") == std::string_view::npos)
        return false;
    std::string s(text::trim(body));
    static const std::regex kWrappers[] = {
        std::regex(R"(^(?:window|document)\.addEventListener\(\s*["'](?:load|DOMContentLoaded)["']\s*,\s*function\s*\(\s*\)\s*\{([\s\S]*)\}\s*(?:,\s*(?:true|false)\s*)?\)\s*;?$)"),
        std::regex(R"(^window\.onload\s*=\s*function\s*\(\s*\)\s*\{([\s\S]*)\}\s*;?$)"),
        std::regex(R"(^\(\s*function\s*\(\s*\)\s*\{([\s\S]*)\}\s*\)\s*\(\s*\)\s*;?$)")};
    std::smatch m;
    for (const auto& w : kWrappers) {
        if (std::regex_match(s, m, w)) {
            s = m[1].str();
            break;
        }
    }
    static const std::regex kTarget(
        R"(^document\.(?:getElementById\(\s*(["'])([^"']+)\1\s*\)|querySelector\(\s*(["'])#([^"']+)\3\s*\)))");
    static const std::regex kSet(R"(^\.setAttribute\(\s*(["'])(action|href)\1\s*,\s*(["'])([^"']*)\3\s*\)$)",
                                 std::regex::icase);
    static const std::regex kRemove(R"(^\.removeAttribute\(\s*(["'])(action|href)\1\s*\)$)", std::regex::icase);
    static const std::regex kAssign(R"(^\.(action|href)\s*=\s*(["'])([^"']*)\2$)");
    Rebindings local;
    bool any = false;
    for (const auto& raw_stmt : split_statements(s)) {
        std::string stmt(text::trim(raw_stmt));
        if (stmt.empty()) continue;
        std::smatch tm;
        if (!std::regex_search(stmt, tm, kTarget)) return false;
        std::string id = tm[2].matched ? tm[2].str() : tm[4].str();
        std::string tail(text::trim(std::string_view(stmt).substr(tm.length(0))));
        std::smatch am;
        if (std::regex_match(tail, am, kSet)) {
            local[id][text::to_lower_ascii(am[2].str())] = am[4].str();
        } else if (std::regex_match(tail, am, kRemove)) {
            local[id][text::to_lower_ascii(am[2].str())] = std::nullopt;
        } else if (std::regex_match(tail, am, kAssign)) {
            local[id][am[1].str()] = am[3].str();
        } else {
            return false;
        }
        any = true;
    }
    if (!any) return false;
    for (auto& [id, attrs] : local)
        for (auto& [name, value] : attrs) out[id][name] = value;
    return true;
}

// Last string literal assigned to document.title by any script.
inline std::optional<std::string> scripted_title(const html::Tree& tree) {
    static const std::regex kTitle(R"(document\.title\s*=\s*(["'])([^"']*)\1)");
    std::optional<std::string> title;
    for (const auto& n : tree.nodes) {
        if (n.type != html::Node::Type::element || n.tag != "script") continue;
        if (n.text.find("document.title") == std::string::npos) continue;
        for (std::sregex_iterator it(n.text.begin(), n.text.end(), kTitle), end; it != end; ++it)
            title = (*it)[2].str();
    }
    return title;
}

inline std::string one_line(std::string_view v) { return text::collapse_whitespace(v); }

inline std::string truncate_script(const std::string& body) {
    // count code points
    size_t cps = 0, cut = std::string::npos;
    for (size_t i = 0; i < body.size(); ++i) {
        if ((static_cast<unsigned char>(body[i]) & 0xC0) != 0x80) {
            if (cps == kScriptDisplayLimit) cut = i;
            ++cps;
        }
    }
    if (cps <= kScriptDisplayLimit) return body;
    return body.substr(0, cut) + "\xE2\x80\xA6[+" + std::to_string(cps - kScriptDisplayLimit) + " chars]";
}

enum class HideCause { none, p1, p2 };

class DocumentBuilder {
public:
    DocumentBuilder(const html::Tree& tree, std::string_view url, const PatchConfig& config)
        : tree_(tree), config_(config) {
        doc_.url = std::string(url);
        for (const auto& n : tree.nodes) {
            if (n.type == html::Node::Type::element && n.tag == "style") {
                auto rules = css::parse_stylesheet(n.text);
                doc_.stylesheet_rules.insert(doc_.stylesheet_rules.end(), rules.begin(), rules.end());
            }
        }
        hiding_ = std::make_unique<css::HidingIndex>(doc_.stylesheet_rules);
        if (config.p3_form_action_validation) {
            for (size_t i = 0; i < tree.nodes.size(); ++i) {
                const auto& n = tree.nodes[i];
                if (n.type == html::Node::Type::element && n.tag == "script" && !n.has_attr("src") &&
                    parse_rebinding_script(n.text, rebindings_)) {
                    folded_scripts_.push_back(static_cast<int>(i));
                }
            }
        }
        if (!config.p6_title_script_guard) title_override_ = scripted_title(tree);
    }

    ParsedDocument build() && {
        walk(0, HideCause::none, false, -1);
        for (size_t i = 0; i < doc_.elements.size(); ++i) finalize(i);
        auto add = [&](std::string_view id, size_t n) {
            if (n) doc_.patch_trace.push_back({std::string(id), n});
        };
        add("P1", hidden_by_p1_);
        add("P2", hidden_by_p2_);
        add("P3", p3_count_);
        add("P6", p6_count_);
        return std::move(doc_);
    }

private:
    void walk(int idx, HideCause inherited, bool inherited_hidden, int owner) {
        const auto& node = tree_.nodes[idx];
        if (node.type == html::Node::Type::text) {
            if (owner >= 0 && !(inherited != HideCause::none)) {
                auto& buf = own_text_[static_cast<size_t>(owner)];
                if (!buf.empty()) buf.push_back(' ');
                buf += node.text;
            }
            return;
        }
        HideCause cause = inherited;
        bool hidden = inherited_hidden;
        if (node.type == html::Node::Type::element) {
            if (node.tag == "noscript" || node.tag == "template") return;
            const auto* style = node.attr("style");
            bool hidden_attr = node.has_attr("hidden");
            bool inline_none = style && css::sets_display_none(*style);
            bool sheet_none = false;
            if (!hidden_attr && !inline_none && !hiding_->empty()) {
                const auto* cls = node.attr("class");
                const auto* id = node.attr("id");
                sheet_none = hiding_->hides({node.tag, cls ? std::string_view(*cls) : std::string_view(),
                                             id ? std::string_view(*id) : std::string_view()});
            }
            hidden = hidden || hidden_attr || inline_none || sheet_none;
            if (cause == HideCause::none) {
                if ((hidden_attr || inline_none) && config_.p1_hidden_attr) cause = HideCause::p1;
                else if (sheet_none && config_.p2_css_display_none) cause = HideCause::p2;
            }
            auto kind = tag_kind_from_string(node.tag);
            if (kind && !is_folded(idx)) {
                if (cause == HideCause::p1) {
                    ++hidden_by_p1_;
                } else if (cause == HideCause::p2) {
                    ++hidden_by_p2_;
                } else {
                    ParsedElement el;
                    el.kind = *kind;
                    el.source_span = {node.begin, node.end};
                    el.visible = !hidden;
                    el.order_index = doc_.elements.size();
                    if (const auto* id = node.attr("id")) el.dom_id = *id;
                    doc_.elements.push_back(std::move(el));
                    nodes_.push_back(idx);
                    own_text_.emplace_back();
                    owner = static_cast<int>(doc_.elements.size() - 1);
                }
            } else if (kind && is_folded(idx)) {
                ++p3_count_;
            }
        }
        for (int child : node.children) walk(child, cause, hidden, owner);
    }

    bool is_folded(int idx) const {
        return std::find(folded_scripts_.begin(), folded_scripts_.end(), idx) != folded_scripts_.end();
    }

    void finalize(size_t i) {
        auto& el = doc_.elements[i];
        const auto& node = tree_.nodes[nodes_[i]];
        if (el.kind == TagKind::script) {
            el.script_body = node.text;
            el.text = truncate_script(text::to_lower_utf8(one_line(node.text)));
        } else if (el.kind == TagKind::title) {
            std::string title = node.text;
            if (title_override_) {
                if (*title_override_ != title) ++p6_count_;
                title = *title_override_;
            }
            el.text = text::to_lower_utf8(one_line(title));
        } else {
            el.text = text::to_lower_utf8(one_line(own_text_[i]));
        }

        std::map<std::string, std::optional<std::string>> rebound;
        if (!el.dom_id.empty()) {
            if (auto it = rebindings_.find(el.dom_id); it != rebindings_.end()) rebound = it->second;
        }
        for (auto name : relevant_attributes(el.kind)) {
            std::optional<std::string> value;
            if (const auto* v = node.attr(name)) value = *v;
            if (auto it = rebound.find(std::string(name)); it != rebound.end()) {
                value = it->second;
                ++p3_count_;
            }
            if (!value) continue;
            std::string v = one_line(*value);
            if (el.kind == TagKind::form && name == "action" && config_.p3_form_action_validation) {
                auto verdict = validate_form_action(v, doc_.url, config_.action_probe_mode, config_.probe,
                                                    config_.probe_timeout);
                if (verdict != FormActionVerdict::ExternalValid) {
                    v = std::string(kSuspiciousSink);
                    ++p3_count_;
                }
            }
            el.attributes.push_back({std::string(name), std::move(v)});
        }
        if (el.kind == TagKind::a) {
            for (const auto& a : node.attrs) {
                if (a.name.size() > 2 && a.name.compare(0, 2, "on") == 0)
                    el.attributes.push_back({a.name, one_line(a.value)});
            }
        }
    }

    const html::Tree& tree_;
    const PatchConfig& config_;
    ParsedDocument doc_;
    std::unique_ptr<css::HidingIndex> hiding_;
    Rebindings rebindings_;
    std::vector<int> folded_scripts_;
    std::optional<std::string> title_override_;
    std::vector<int> nodes_;
    std::vector<std::string> own_text_;
    size_t hidden_by_p1_ = 0;
    size_t hidden_by_p2_ = 0;
    size_t p3_count_ = 0;
    size_t p6_count_ = 0;
};

}  // namespace detail

// html must already be UTF-8 (see parse_html for raw bytes).
inline ParsedDocument parse_document(std::string_view html, std::string_view url, const PatchConfig& config = {}) {
    if (!encoding::is_valid_utf8(html)) throw MalformedInput("parse_document: input is not valid UTF-8 text");
    auto tree = html::parse_tree(html);
    return detail::DocumentBuilder(tree, url, config).build();
}

// Bytes -> ParsedDocument, running encoding normalization first when the
// encoding patch is on (otherwise only invalid UTF-8 is replaced).
inline ParsedDocument parse_html(std::string_view bytes, std::string_view url, const PatchConfig& config = {}) {
    if (config.p4_1_encoding_normalization) {
        auto norm = normalize_encodings(bytes);
        auto doc = parse_document(norm.text, url, config);
        if (norm.decoded_wrappers)
            doc.patch_trace.push_back({"P4.1", static_cast<size_t>(norm.decoded_wrappers)});
        return doc;
    }
    return parse_document(encoding::sanitize_utf8(bytes), url, config);
}

inline std::string render_element(const ParsedElement& el) {
    std::string line(to_string(el.kind));
    line += ": ";
    line += el.text.empty() ? std::string(kEmptyMarker) : el.text;
    for (const auto& a : el.attributes) {
        line += " | ";
        line += a.name;
        line += '=';
        line += a.value;
    }
    return line;
}

// One line per element: `<kind>: <text>` followed by ` | name=value` for each
// relevant attribute; `<EMPTY>` stands in for empty text.
inline std::string render_parsed_text(const ParsedDocument& doc) {
    std::string out;
    for (const auto& el : doc.elements) {
        out += render_element(el);
        out += '\n';
    }
    return out;
}

inline std::string escape_markup(std::string_view s, bool attribute) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"':
                if (attribute) {
                    out += "&quot;";
                    break;
                }
                [[fallthrough]];
            default: out.push_back(c);
        }
    }
    return out;
}

// Flat markup for the surviving elements. Parsing it again reproduces the
// same elements (kinds, text, attributes, order).
inline std::string to_markup(const ParsedDocument& doc) {
    std::string out;
    for (const auto& el : doc.elements) {
        auto tag = std::string(to_string(el.kind));
        out += "<" + tag;
        if (!el.dom_id.empty()) out += " id=\"" + escape_markup(el.dom_id, true) + "\"";
        for (const auto& a : el.attributes) out += " " + a.name + "=\"" + escape_markup(a.value, true) + "\"";
        out += ">";
        if (html::is_void_element(tag)) {
            out += "\n";
            continue;
        }
        if (el.kind == TagKind::script) {
            out += el.script_body;
        } else {
            out += escape_markup(el.text, false);
        }
        out += "</" + tag + ">\n";
    }
    return out;
}

}  // namespace phishscope
