#include <gtest/gtest.h>

#include <random>
#include <set>

#include "phishscope/window.hpp"
#include "support/streams.hpp"

using namespace phishscope;
using phishscope::testing::stream_of;

TEST(Tokenize, SplitsPunctuationAndAttributesElements) {
    auto ts = tokenize("a: sign in | href=/l");
    std::vector<std::string> want = {"a", ":", "sign", "in", "|", "href", "=", "/l"};
    EXPECT_EQ(ts.tokens, want);
    for (auto e : ts.element_of) EXPECT_EQ(e, 0u);
}

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, EmptyMarkerStaysWhole) {
    auto ts = tokenize("form: <EMPTY> | action=SUSPICIOUS_SINK\n");
    std::vector<std::string> want = {"form", ":", "<EMPTY>", "|", "action", "=", "SUSPICIOUS_SINK"};
    EXPECT_EQ(ts.tokens, want);
}

TEST(Tokenize, AttributionPartitionsContiguousGroups) {
    std::string text = "h1: verify your account\na: sign in | href=/l\n";
    auto ts = tokenize(text);
    // Rejoin each element's tokens and compare against its line with whitespace removed.
    std::vector<std::string> joined(2);
    for (size_t i = 0; i < ts.size(); ++i) {
        ASSERT_LT(ts.element_of[i], 2u);
        if (i > 0) ASSERT_GE(ts.element_of[i], ts.element_of[i - 1]);
        joined[ts.element_of[i]] += ts.tokens[i];
    }
    EXPECT_EQ(joined[0], "h1:verifyyouraccount");
    EXPECT_EQ(joined[1], "a:signin|href=/l");
}

TEST(Tokenize, DocumentOverloadUsesOrderIndex) {
    auto doc = parse_document("<h1>Hi</h1><p>there you</p>", "u");
    auto ts = tokenize(doc);
    EXPECT_EQ(ts.tokens, tokenize(render_parsed_text(doc)).tokens);
    EXPECT_EQ(ts.element_of, (std::vector<size_t>{0, 0, 0, 1, 1, 1, 1}));
}

TEST(MakeWindows, BoundariesEveryFiftyTokens) {
    auto ts = stream_of(std::vector<size_t>(20, 50));  // T = 1000
    auto chunks = make_windows(ts, {512, 256});
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].token_span, (std::pair<size_t, size_t>{0, 500}));
    EXPECT_EQ(chunks[1].token_span, (std::pair<size_t, size_t>{250, 750}));
    EXPECT_EQ(chunks[2].token_span, (std::pair<size_t, size_t>{500, 1000}));
    EXPECT_EQ(chunks[1].element_range, (std::pair<size_t, size_t>{5, 14}));
}

TEST(MakeWindows, ShortDocumentIsOneChunk) {
    auto ts = stream_of({100, 100, 100});
    auto chunks = make_windows(ts, {512, 256}, Label::phishing);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].size(), 300u);
    EXPECT_EQ(chunks[0].label, Label::phishing);
}

TEST(MakeWindows, OversizedElementHardSplit) {
    auto ts = stream_of({600});
    auto chunks = make_windows(ts, {512, 256});
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].token_span, (std::pair<size_t, size_t>{0, 512}));
    EXPECT_EQ(chunks[1].token_span, (std::pair<size_t, size_t>{512, 600}));
    EXPECT_TRUE(chunks[0].hard_split);
    EXPECT_TRUE(chunks[1].hard_split);
    WindowConfig strict{512, 256};
    strict.strict = true;
    EXPECT_THROW(make_windows(ts, strict), ElementTooLarge);
}

TEST(MakeWindows, RejectsBadConfig) {
    auto ts = stream_of({3});
    EXPECT_THROW(make_windows(ts, {4, 5}), Error);
    EXPECT_THROW(make_windows(ts, {4, 0}), Error);
}

TEST(MakeWindows, Deterministic) {
    auto ts = stream_of({30, 400, 10, 90, 300, 5, 5, 700, 20});
    auto a = make_windows(ts, {256, 100});
    auto b = make_windows(ts, {256, 100});
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].token_span, b[i].token_span);
        EXPECT_EQ(a[i].tokens, b[i].tokens);
    }
}

TEST(MergeChunks, DisjointAndOverlapping) {
    auto ts = stream_of({10, 10});
    auto disjoint = make_windows(ts, {10, 10});
    ASSERT_EQ(disjoint.size(), 2u);
    EXPECT_EQ(merge_chunks(disjoint, 2).size(), 20u);

    auto overlap_ts = stream_of({5, 5, 5});
    auto overlap = make_windows(overlap_ts, {10, 5});
    ASSERT_EQ(overlap.size(), 2u);
    auto m = merge_chunks(overlap, 2);
    EXPECT_EQ(m.size(), 15u);  // 10 + 10 - 5
    EXPECT_EQ(m.tokens, overlap_ts.tokens);
    EXPECT_EQ(m.token_span, (std::pair<size_t, size_t>{0, 15}));
}

TEST(MergeChunks, FullMergeCoversDocument) {
    auto ts = stream_of({7, 3, 12, 9, 4, 30, 2});
    auto chunks = make_windows(ts, {20, 8});
    auto m = merge_chunks(chunks, chunks.size());
    EXPECT_EQ(m.token_span, (std::pair<size_t, size_t>{0, ts.size()}));
    EXPECT_EQ(m.tokens, ts.tokens);
}

namespace {

size_t brute_force_count(size_t T, size_t W, size_t S) {
    size_t i = 0;
    while (i * S + W < T) ++i;
    return i + 1;
}

std::set<size_t> index_set(const Chunk& c) {
    std::set<size_t> s;
    for (size_t j = c.token_span.first; j < c.token_span.second; ++j) s.insert(j);
    return s;
}

}  // namespace

TEST(WindowProperties, RandomConfigurations) {
    std::mt19937 rng(2024);
    for (int round = 0; round < 1000; ++round) {
        size_t W = 2 + rng() % 60;
        size_t S = 1 + rng() % W;
        size_t n_elements = 1 + rng() % 40;
        bool snap_free = round % 2 == 0;
        std::vector<size_t> lengths;
        for (size_t e = 0; e < n_elements; ++e) lengths.push_back(snap_free ? 1 : 1 + rng() % (W + W / 2));
        auto ts = stream_of(lengths);
        auto chunks = make_windows(ts, {W, S});
        std::vector<char> seen(n_elements, 0);
        std::set<size_t> covered;
        for (const auto& c : chunks) {
            ASSERT_LE(c.size(), W);
            ASSERT_GT(c.size(), 0u);
            for (size_t j = c.token_span.first; j < c.token_span.second; ++j) {
                seen[ts.element_of[j]] = 1;
                covered.insert(j);
            }
            // whole elements only, except for pieces of oversized elements
            if (!c.hard_split) {
                ASSERT_TRUE(c.token_span.first == 0 || ts.element_of[c.token_span.first - 1] != ts.element_of[c.token_span.first]);
                ASSERT_TRUE(c.token_span.second == ts.size() || ts.element_of[c.token_span.second] != ts.element_of[c.token_span.second - 1]);
            }
        }
        ASSERT_EQ(covered.size(), ts.size());
        for (auto s : seen) ASSERT_TRUE(s);
        if (snap_free) ASSERT_EQ(chunks.size(), brute_force_count(ts.size(), W, S)) << ts.size() << " " << W << " " << S;
        size_t longest = *std::max_element(lengths.begin(), lengths.end());
        if (longest <= S && ts.size() > W) ASSERT_GE(chunks.size(), brute_force_count(ts.size(), W, S));
        for (size_t k = 2; k < chunks.size(); ++k) {
            auto a = index_set(merge_chunks(chunks, k));
            auto b = index_set(merge_chunks(chunks, k + 1));
            ASSERT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
            std::set<size_t> u;
            for (size_t i = 0; i < k; ++i) {
                auto s = index_set(chunks[i]);
                u.insert(s.begin(), s.end());
            }
            ASSERT_EQ(a, u);
            ASSERT_EQ(merge_chunks(chunks, k).size(), u.size());
        }
    }
}

TEST(ChunkDump, OneRecordPerChunk) {
    auto chunks = make_windows(stream_of(std::vector<size_t>(20, 50)), {512, 256}, Label::benign);
    auto dump = chunk_dump(chunks, "doc1");
    auto lines = text::split(dump, '\n');
    ASSERT_EQ(lines.size(), 4u);  // trailing empty
    auto j = nlohmann::json::parse(lines[1]);
    EXPECT_EQ(j["token_span"], nlohmann::json({250, 750}));
    EXPECT_EQ(j["token_count"], 500);
    EXPECT_EQ(j["label"], "benign");
    EXPECT_EQ(j["doc"], "doc1");
}

TEST(StratifiedSplit, SeededAndProportional) {
    std::vector<Label> labels;
    for (int i = 0; i < 100; ++i) labels.push_back(i % 4 == 0 ? Label::phishing : Label::benign);
    auto a = stratified_split(labels, 0.7, 5);
    auto b = stratified_split(labels, 0.7, 5);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.train.size() + a.test.size(), 100u);
    size_t pos = 0;
    for (auto i : a.train) pos += labels[i] == Label::phishing;
    EXPECT_EQ(pos, 18u);  // round(25 * 0.7)
    EXPECT_NE(stratified_split(labels, 0.7, 6).train, a.train);
}
