#pragma once

// Tokenization of the parsed text and tag-aligned sliding windows.
//
// Spans are 0-based and half-open over the document token stream:
// window i nominally covers [i*S, min(i*S + W, T)).

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phishscope/core.hpp"
#include "phishscope/parser.hpp"

namespace phishscope {

struct WindowConfig {
    size_t W = 512;
    size_t S = 256;
    bool merge_enabled = true;
    bool strict = false;  // throw ElementTooLarge instead of hard-splitting

    void validate() const {
        if (S < 1 || S > W) throw Error("window config requires 1 <= S <= W");
    }
};

struct TokenStream {
    std::vector<std::string> tokens;
    std::vector<size_t> element_of;  // order_index of the element each token came from

    size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

inline bool is_split_punct(char c) {
    switch (c) {
        case ':': case '|': case '=': case ',': case ';': case '(': case ')':
        case '{': case '}': case '[': case ']': case '"': case '\'':
            return true;
        default:
            return false;
    }
}

inline void tokenize_line(std::string_view line, size_t element, TokenStream& out) {
    size_t i = 0;
    while (i < line.size()) {
        if (text::is_space(line[i])) {
            ++i;
            continue;
        }
        if (is_split_punct(line[i])) {
            out.tokens.emplace_back(1, line[i]);
            out.element_of.push_back(element);
            ++i;
            continue;
        }
        size_t b = i;
        while (i < line.size() && !text::is_space(line[i]) && !is_split_punct(line[i])) ++i;
        out.tokens.emplace_back(line.substr(b, i - b));
        out.element_of.push_back(element);
    }
}

// One element per line, as produced by render_parsed_text.
inline TokenStream tokenize(std::string_view parsed_text) {
    TokenStream out;
    size_t element = 0;
    size_t b = 0;
    while (b < parsed_text.size()) {
        size_t nl = parsed_text.find('\n', b);
        if (nl == std::string_view::npos) nl = parsed_text.size();
        tokenize_line(parsed_text.substr(b, nl - b), element++, out);
        b = nl + 1;
    }
    return out;
}

inline TokenStream tokenize(const ParsedDocument& doc) {
    TokenStream out;
    for (const auto& el : doc.elements) tokenize_line(render_element(el), el.order_index, out);
    return out;
}

struct Chunk {
    std::vector<std::string> tokens;
    std::pair<size_t, size_t> token_span{0, 0};     // [start, end)
    std::pair<size_t, size_t> element_range{0, 0};  // inclusive order_index range
    std::optional<Label> label;
    bool hard_split = false;  // contains a piece of an element longer than W

    size_t size() const { return tokens.size(); }
    std::string text() const { return text::join(tokens, " "); }
};

namespace detail {

// Token positions where a new unit starts, plus T. A unit is an element, or
// a W-sized piece of an element that does not fit in a window.
inline std::vector<size_t> unit_boundaries(const TokenStream& ts, const WindowConfig& cfg,
                                           std::vector<char>& split_unit) {
    std::vector<size_t> bounds;
    size_t T = ts.size();
    size_t i = 0;
    while (i < T) {
        size_t j = i;
        while (j < T && ts.element_of[j] == ts.element_of[i]) ++j;
        size_t len = j - i;
        if (len > cfg.W) {
            if (cfg.strict)
                throw ElementTooLarge("element " + std::to_string(ts.element_of[i]) + " has " +
                                      std::to_string(len) + " tokens, window is " + std::to_string(cfg.W));
            for (size_t p = i; p < j; p += cfg.W) {
                bounds.push_back(p);
                split_unit.push_back(1);
            }
        } else {
            bounds.push_back(i);
            split_unit.push_back(0);
        }
        i = j;
    }
    bounds.push_back(T);
    split_unit.push_back(0);
    return bounds;
}

// Last boundary <= pos.
inline size_t snap_back(const std::vector<size_t>& bounds, size_t pos) {
    auto it = std::upper_bound(bounds.begin(), bounds.end(), pos);
    return *(it - 1);
}

}  // namespace detail

inline size_t nominal_window_count(size_t T, size_t W, size_t S) {
    if (T <= W) return 1;
    return (T - W + S - 1) / S + 1;
}

inline std::vector<Chunk> make_windows(const TokenStream& ts, const WindowConfig& cfg,
                                       std::optional<Label> label = std::nullopt) {
    cfg.validate();
    std::vector<Chunk> out;
    if (ts.empty()) return out;
    std::vector<char> split_unit;
    auto bounds = detail::unit_boundaries(ts, cfg, split_unit);
    const size_t T = ts.size();

    // Ends snap back to the last whole unit within W of the start. Every unit
    // is <= W tokens so a window is never empty.
    auto window_at = [&](size_t start) {
        size_t end = detail::snap_back(bounds, std::min(start + cfg.W, T));
        return std::pair<size_t, size_t>(start, end);
    };

    std::vector<std::pair<size_t, size_t>> spans;
    if (T <= cfg.W) {
        spans.emplace_back(0, T);
    } else {
        size_t n = nominal_window_count(T, cfg.W, cfg.S);
        for (size_t i = 0; i < n; ++i) spans.push_back(window_at(detail::snap_back(bounds, i * cfg.S)));
    }

    // Coverage fix-up: snapping can open gaps between windows or leave a tail.
    std::vector<std::pair<size_t, size_t>> covered;
    size_t reach = 0;
    for (const auto& s : spans) {
        while (reach < s.first) {
            auto extra = window_at(reach);
            covered.push_back(extra);
            reach = extra.second;
        }
        if (covered.empty() || covered.back() != s) covered.push_back(s);
        reach = std::max(reach, s.second);
    }
    while (reach < T) {
        auto extra = window_at(detail::snap_back(bounds, reach));
        covered.push_back(extra);
        reach = extra.second;
    }

    for (const auto& [b, e] : covered) {
        Chunk c;
        c.tokens.assign(ts.tokens.begin() + static_cast<long>(b), ts.tokens.begin() + static_cast<long>(e));
        c.token_span = {b, e};
        c.element_range = {ts.element_of[b], ts.element_of[e - 1]};
        c.label = label;
        auto first = static_cast<size_t>(std::lower_bound(bounds.begin(), bounds.end(), b) - bounds.begin());
        for (size_t u = first; u < bounds.size() && bounds[u] < e; ++u) c.hard_split = c.hard_split || split_unit[u];
        out.push_back(std::move(c));
    }
    return out;
}

// Union of the first k chunks by document token index.
inline Chunk merge_chunks(const std::vector<Chunk>& chunks, size_t k) {
    if (k < 1 || k > chunks.size()) throw Error("merge_chunks: k out of range");
    std::vector<std::pair<size_t, const Chunk*>> order;
    for (size_t i = 0; i < k; ++i) order.emplace_back(chunks[i].token_span.first, &chunks[i]);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    Chunk out;
    out.label = chunks.front().label;
    out.token_span = {order.front().second->token_span.first, 0};
    out.element_range = order.front().second->element_range;
    size_t reach = out.token_span.first;
    for (const auto& [start, c] : order) {
        for (size_t j = std::max(reach, c->token_span.first); j < c->token_span.second; ++j)
            out.tokens.push_back(c->tokens[j - c->token_span.first]);
        reach = std::max(reach, c->token_span.second);
        out.element_range.first = std::min(out.element_range.first, c->element_range.first);
        out.element_range.second = std::max(out.element_range.second, c->element_range.second);
        out.hard_split = out.hard_split || c->hard_split;
    }
    out.token_span.second = reach;
    return out;
}

inline nlohmann::json chunk_record(const Chunk& c, size_t index) {
    nlohmann::json j;
    j["index"] = index;
    j["token_span"] = {c.token_span.first, c.token_span.second};
    j["element_range"] = {c.element_range.first, c.element_range.second};
    j["token_count"] = c.size();
    j["label"] = c.label ? nlohmann::json(to_string(*c.label)) : nlohmann::json(nullptr);
    if (c.hard_split) j["hard_split"] = true;
    j["text"] = c.text();
    return j;
}

// JSON lines, one chunk per line.
inline std::string chunk_dump(const std::vector<Chunk>& chunks, std::string_view doc_id = {}) {
    std::string out;
    for (size_t i = 0; i < chunks.size(); ++i) {
        auto j = chunk_record(chunks[i], i);
        if (!doc_id.empty()) j["doc"] = doc_id;
        out += j.dump() + "\n";
    }
    return out;
}

// Seeded split of item indices into (train, test); `train_fraction` of each
// label goes to train.
struct Split {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

inline Split stratified_split(const std::vector<Label>& labels, double train_fraction, uint64_t seed) {
    Split s;
    std::mt19937_64 rng(seed);
    for (Label want : {Label::phishing, Label::benign}) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == want) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto cut = static_cast<size_t>(static_cast<double>(idx.size()) * train_fraction + 0.5);
        s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<long>(cut));
        s.test.insert(s.test.end(), idx.begin() + static_cast<long>(cut), idx.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

}  // namespace phishscope
