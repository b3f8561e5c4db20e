#pragma once

// Tag-soup tolerant HTML tokenizer and tree builder. Produces a flat node
// arena; never rejects input.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phishscope/core.hpp"
#include "phishscope/encoding.hpp"

namespace phishscope::html {

struct Attribute {
    std::string name;  // lowercase
    std::string value;
};

struct Node {
    enum class Type { document, element, text };
    Type type = Type::element;
    std::string tag;  // lowercase, elements only
    std::vector<Attribute> attrs;
    std::string text;  // text nodes, or raw body of raw-text elements
    size_t begin = 0;  // byte span of the originating markup
    size_t end = 0;
    int parent = -1;
    std::vector<int> children;

    const std::string* attr(std::string_view name) const {
        for (const auto& a : attrs)
            if (a.name == name) return &a.value;
        return nullptr;
    }
    bool has_attr(std::string_view name) const { return attr(name) != nullptr; }
};

struct Tree {
    std::vector<Node> nodes;  // nodes[0] is the document root
    const Node& root() const { return nodes.front(); }
};

inline bool is_void_element(std::string_view tag) {
    static constexpr std::string_view kVoid[] = {"area", "base", "br", "col", "embed", "hr", "img",
                                                 "input", "keygen", "link", "meta", "param",
                                                 "source", "track", "wbr"};
    for (auto v : kVoid)
        if (v == tag) return true;
    return false;
}

inline bool is_raw_text_element(std::string_view tag) {
    static constexpr std::string_view kRaw[] = {"script", "style", "textarea", "title", "noscript",
                                                "xmp", "iframe", "noembed", "noframes"};
    for (auto v : kRaw)
        if (v == tag) return true;
    return false;
}

// Elements whose start tag implicitly closes an open <p>.
inline bool closes_paragraph(std::string_view tag) {
    static constexpr std::string_view kTags[] = {
        "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset",
        "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
        "hgroup", "hr", "main", "menu", "nav", "ol", "p", "pre", "section", "table", "ul"};
    for (auto v : kTags)
        if (v == tag) return true;
    return false;
}

inline bool is_heading(std::string_view tag) {
    return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
}

inline const std::unordered_map<std::string_view, uint32_t>& named_entities() {
    static const std::unordered_map<std::string_view, uint32_t> kEntities = {
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
        {"apos", '\''},    {"nbsp", 0xA0},    {"copy", 0xA9},    {"reg", 0xAE},
        {"trade", 0x2122}, {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
        {"laquo", 0xAB},   {"raquo", 0xBB},   {"lsquo", 0x2018}, {"rsquo", 0x2019},
        {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"bull", 0x2022},  {"middot", 0xB7},
        {"euro", 0x20AC},  {"pound", 0xA3},   {"yen", 0xA5},     {"cent", 0xA2},
        {"sect", 0xA7},    {"para", 0xB6},    {"deg", 0xB0},     {"times", 0xD7},
        {"eacute", 0xE9},  {"egrave", 0xE8},  {"aacute", 0xE1},  {"agrave", 0xE0},
        {"ouml", 0xF6},    {"uuml", 0xFC},    {"auml", 0xE4},    {"szlig", 0xDF},
        {"ccedil", 0xE7},  {"ntilde", 0xF1},  {"iexcl", 0xA1},   {"iquest", 0xBF},
        {"shy", 0xAD},     {"zwnj", 0x200C},  {"zwj", 0x200D},   {"larr", 0x2190},
        {"rarr", 0x2192},  {"uarr", 0x2191},  {"darr", 0x2193},  {"check", 0x2713}};
    return kEntities;
}

inline std::string decode_entities(std::string_view s) {
    if (s.find('&') == std::string_view::npos) return std::string(s);
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        size_t j = i + 1;
        if (j < s.size() && s[j] == '#') {
            ++j;
            bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
            if (hex) ++j;
            size_t b = j;
            while (j < s.size() && (hex ? std::isxdigit(static_cast<unsigned char>(s[j]))
                                        : std::isdigit(static_cast<unsigned char>(s[j]))) &&
                   j - b < 8)
                ++j;
            if (j > b) {
                uint32_t cp = static_cast<uint32_t>(std::stoul(std::string(s.substr(b, j - b)), nullptr, hex ? 16 : 10));
                if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = encoding::kReplacement;
                encoding::append_utf8(out, cp);
                if (j < s.size() && s[j] == ';') ++j;
                i = j - 1;
                continue;
            }
            out.push_back('&');
            continue;
        }
        size_t b = j;
        while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j])) && j - b < 10) ++j;
        auto name = s.substr(b, j - b);
        const auto& table = named_entities();
        auto it = table.find(name);
        if (it != table.end() && !name.empty()) {
            encoding::append_utf8(out, it->second);
            if (j < s.size() && s[j] == ';') ++j;
            i = j - 1;
            continue;
        }
        out.push_back('&');
    }
    return out;
}

class TreeBuilder {
public:
    explicit TreeBuilder(std::string_view src) : src_(src) {
        Node doc;
        doc.type = Node::Type::document;
        doc.begin = 0;
        doc.end = src.size();
        tree_.nodes.push_back(std::move(doc));
        stack_.push_back(0);
    }

    Tree build() && {
        size_t i = 0;
        while (i < src_.size()) {
            size_t lt = src_.find('<', i);
            if (lt == std::string_view::npos) {
                add_text(i, src_.size());
                break;
            }
            if (lt > i) add_text(i, lt);
            i = consume_markup(lt);
        }
        while (stack_.size() > 1) close_top(src_.size());
        return std::move(tree_);
    }

private:
    size_t consume_markup(size_t lt) {
        auto rest = src_.substr(lt);
        if (rest.substr(0, 4) == "<!--") {
            size_t end = src_.find("-->", lt + 4);
            return end == std::string_view::npos ? src_.size() : end + 3;
        }
        if (rest.size() > 1 && (rest[1] == '!' || rest[1] == '?')) {
            size_t end = src_.find('>', lt);
            return end == std::string_view::npos ? src_.size() : end + 1;
        }
        if (rest.size() > 2 && rest[1] == '/' && std::isalpha(static_cast<unsigned char>(rest[2]))) {
            size_t j = lt + 2;
            size_t b = j;
            while (j < src_.size() && !text::is_space(src_[j]) && src_[j] != '>' && src_[j] != '/') ++j;
            std::string name = text::to_lower_ascii(src_.substr(b, j - b));
            size_t gt = src_.find('>', j);
            size_t end = gt == std::string_view::npos ? src_.size() : gt + 1;
            handle_end_tag(name, end);
            return end;
        }
        if (rest.size() > 1 && std::isalpha(static_cast<unsigned char>(rest[1]))) {
            return handle_start_tag(lt);
        }
        add_text(lt, lt + 1);
        return lt + 1;
    }

    size_t handle_start_tag(size_t lt) {
        size_t j = lt + 1;
        size_t b = j;
        while (j < src_.size() && !text::is_space(src_[j]) && src_[j] != '>' && src_[j] != '/') ++j;
        Node el;
        el.tag = text::to_lower_ascii(src_.substr(b, j - b));
        el.begin = lt;
        bool self_closing = false;
        // attributes
        while (j < src_.size()) {
            while (j < src_.size() && (text::is_space(src_[j]) || src_[j] == '/')) {
                if (src_[j] == '/' && j + 1 < src_.size() && src_[j + 1] == '>') self_closing = true;
                ++j;
            }
            if (j >= src_.size() || src_[j] == '>') break;
            size_t nb = j;
            while (j < src_.size() && !text::is_space(src_[j]) && src_[j] != '>' && src_[j] != '=' &&
                   !(src_[j] == '/' && j + 1 < src_.size() && src_[j + 1] == '>'))
                ++j;
            if (j == nb) {  // stray '=' etc.
                ++j;
                continue;
            }
            Attribute attr;
            attr.name = text::to_lower_ascii(src_.substr(nb, j - nb));
            size_t k = j;
            while (k < src_.size() && text::is_space(src_[k])) ++k;
            if (k < src_.size() && src_[k] == '=') {
                ++k;
                while (k < src_.size() && text::is_space(src_[k])) ++k;
                if (k < src_.size() && (src_[k] == '"' || src_[k] == '\'')) {
                    char q = src_[k];
                    size_t vb = k + 1;
                    size_t ve = src_.find(q, vb);
                    if (ve == std::string_view::npos) ve = src_.size();
                    attr.value = decode_entities(src_.substr(vb, ve - vb));
                    j = std::min(ve + 1, src_.size());
                } else {
                    size_t vb = k;
                    while (k < src_.size() && !text::is_space(src_[k]) && src_[k] != '>') ++k;
                    attr.value = decode_entities(src_.substr(vb, k - vb));
                    j = k;
                }
            }
            bool dup = false;
            for (const auto& a : el.attrs) dup = dup || a.name == attr.name;
            if (!dup) el.attrs.push_back(std::move(attr));
        }
        size_t tag_end = j < src_.size() ? j + 1 : src_.size();
        el.end = tag_end;

        apply_implied_end_tags(el.tag, lt);
        int idx = append_node(std::move(el));

        const std::string tag = tree_.nodes[idx].tag;
        if (is_void_element(tag) || self_closing) {
            if (!is_raw_text_element(tag)) return tag_end;
        }
        if (is_raw_text_element(tag)) {
            size_t close = text::ifind(src_, "</" + tag, tag_end);
            size_t body_end = close == std::string_view::npos ? src_.size() : close;
            auto body = src_.substr(tag_end, body_end - tag_end);
            tree_.nodes[idx].text = (tag == "title" || tag == "textarea") ? decode_entities(body) : std::string(body);
            size_t gt = close == std::string_view::npos ? std::string_view::npos : src_.find('>', close);
            size_t end = gt == std::string_view::npos ? src_.size() : gt + 1;
            tree_.nodes[idx].end = end;
            return end;
        }
        stack_.push_back(idx);
        return tag_end;
    }

    void apply_implied_end_tags(const std::string& tag, size_t at) {
        auto top_tag = [&]() -> const std::string& { return tree_.nodes[stack_.back()].tag; };
        if (closes_paragraph(tag) && stack_.size() > 1 && top_tag() == "p") close_top(at);
        if (is_heading(tag) && stack_.size() > 1 && is_heading(top_tag())) close_top(at);
        if (tag == "li") close_up_to("li", {"ul", "ol", "menu"}, at);
        if (tag == "dt" || tag == "dd") {
            close_up_to("dt", {"dl"}, at);
            close_up_to("dd", {"dl"}, at);
        }
        if (tag == "option") close_up_to("option", {"select", "datalist"}, at);
        if (tag == "a") close_up_to("a", {}, at);
        if (tag == "tr" || tag == "td" || tag == "th") {
            close_up_to("td", {"table", "tr"}, at);
            close_up_to("th", {"table", "tr"}, at);
            if (tag == "tr") close_up_to("tr", {"table", "tbody", "thead", "tfoot"}, at);
        }
    }

    // Pops through `target` if it is open below any of `boundaries`.
    void close_up_to(std::string_view target, std::initializer_list<std::string_view> boundaries, size_t at) {
        for (size_t k = stack_.size(); k-- > 1;) {
            const auto& t = tree_.nodes[stack_[k]].tag;
            if (t == target) {
                while (stack_.size() > k) close_top(at);
                return;
            }
            for (auto bnd : boundaries)
                if (t == bnd) return;
        }
    }

    void handle_end_tag(const std::string& name, size_t end) {
        for (size_t k = stack_.size(); k-- > 1;) {
            if (tree_.nodes[stack_[k]].tag == name) {
                while (stack_.size() > k + 1) close_top(end);
                close_top(end);
                return;
            }
        }
        // Unmatched end tags are dropped.
    }

    void close_top(size_t at) {
        int idx = stack_.back();
        stack_.pop_back();
        auto& n = tree_.nodes[idx];
        n.end = std::max(n.end, at);
    }

    int append_node(Node n) {
        int parent = stack_.back();
        n.parent = parent;
        int idx = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(std::move(n));
        tree_.nodes[parent].children.push_back(idx);
        return idx;
    }

    void add_text(size_t b, size_t e) {
        if (b >= e) return;
        int parent = stack_.back();
        auto& siblings = tree_.nodes[parent].children;
        if (!siblings.empty() && tree_.nodes[siblings.back()].type == Node::Type::text &&
            tree_.nodes[siblings.back()].end == b) {
            auto& prev = tree_.nodes[siblings.back()];
            prev.text += decode_entities(src_.substr(b, e - b));
            prev.end = e;
            return;
        }
        Node t;
        t.type = Node::Type::text;
        t.text = decode_entities(src_.substr(b, e - b));
        t.begin = b;
        t.end = e;
        append_node(std::move(t));
    }

    std::string_view src_;
    Tree tree_;
    std::vector<int> stack_;
};

// End (one past '>') of the start tag beginning at `begin`.
inline size_t start_tag_end(std::string_view src, size_t begin) {
    size_t i = begin + 1;
    while (i < src.size()) {
        char c = src[i];
        if (c == '>') return i + 1;
        if (c == '=') {
            ++i;
            while (i < src.size() && text::is_space(src[i])) ++i;
            if (i < src.size() && (src[i] == '"' || src[i] == '\'')) {
                size_t close = src.find(src[i], i + 1);
                if (close == std::string_view::npos) return src.size();
                i = close + 1;
            }
            continue;
        }
        ++i;
    }
    return src.size();
}

inline Tree parse_tree(std::string_view src) { return TreeBuilder(src).build(); }

}  // namespace phishscope::html
