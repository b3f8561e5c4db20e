#pragma once

// Page verdicts: score every window, flag the page if any window is
// phishing, otherwise merge windows progressively (k = 2, 3, ...) and stop
// at the first merged score over the threshold.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/core.hpp"
#include "phishscope/parser.hpp"
#include "phishscope/scorer.hpp"
#include "phishscope/window.hpp"

namespace phishscope {

struct ChunkPrediction {
    size_t chunk_index = 0;
    double confidence = 0.0;
    Label label = Label::benign;
};

enum class DecidedBy { chunk, merge, none };

inline std::string_view to_string(DecidedBy d) {
    switch (d) {
        case DecidedBy::chunk: return "chunk";
        case DecidedBy::merge: return "merge";
        default: return "none";
    }
}

inline DecidedBy decided_by_from_string(std::string_view s) {
    if (s == "chunk") return DecidedBy::chunk;
    if (s == "merge") return DecidedBy::merge;
    return DecidedBy::none;
}

struct MergeStep {
    size_t k = 0;
    double confidence = 0.0;
};

struct Verdict {
    Label label = Label::benign;
    double confidence = 0.0;
    std::vector<ChunkPrediction> chunk_trace;
    std::vector<MergeStep> merge_trace;
    DecidedBy decided_by = DecidedBy::none;
    size_t scorer_calls = 0;
};

inline Verdict classify_chunks(const ChunkScorer& scorer, const std::vector<Chunk>& chunks, bool merge_enabled,
                               double threshold = 0.5) {
    Verdict v;
    auto record = [&](double c) {
        v.confidence = std::max(v.confidence, c);
        ++v.scorer_calls;
    };
    if (chunks.empty()) {
        // Nothing actionable on the page; the model still sees an empty window.
        double c = scorer.score({});
        record(c);
        v.chunk_trace.push_back({0, c, c >= threshold ? Label::phishing : Label::benign});
    }
    for (size_t i = 0; i < chunks.size(); ++i) {
        double c = scorer.score(chunks[i].tokens);
        record(c);
        v.chunk_trace.push_back({i, c, c >= threshold ? Label::phishing : Label::benign});
    }
    bool any = std::any_of(v.chunk_trace.begin(), v.chunk_trace.end(),
                           [](const ChunkPrediction& p) { return p.label == Label::phishing; });
    if (any) {
        v.label = Label::phishing;
        v.decided_by = DecidedBy::chunk;
        return v;
    }
    if (merge_enabled) {
        for (size_t k = 2; k <= chunks.size(); ++k) {
            double c = scorer.score(merge_chunks(chunks, k).tokens);
            record(c);
            v.merge_trace.push_back({k, c});
            if (c >= threshold) {
                v.label = Label::phishing;
                v.decided_by = DecidedBy::merge;
                return v;
            }
        }
    }
    return v;
}

inline Verdict classify_document(const ChunkScorer& scorer, const ParsedDocument& doc, const WindowConfig& wcfg,
                                 double threshold = 0.5) {
    return classify_chunks(scorer, make_windows(tokenize(doc), wcfg), wcfg.merge_enabled, threshold);
}

// Parse -> window -> classify with one configuration.
struct Pipeline {
    std::shared_ptr<const ChunkScorer> scorer;
    PatchConfig patches;
    WindowConfig window;
    double threshold = 0.5;

    ParsedDocument parse(std::string_view html, std::string_view url = {}) const {
        return parse_html(html, url, patches);
    }
    Verdict classify(const ParsedDocument& doc) const { return classify_document(*scorer, doc, window, threshold); }
    Verdict classify_html(std::string_view html, std::string_view url = {}) const { return classify(parse(html, url)); }
};

struct LabeledDocument {
    std::string id;
    std::string url;
    std::string html;
    Label label = Label::benign;
};

// corpus/phishing/*.html and corpus/benign/*.html, sorted by file name. An
// optional `<name>.url` sidecar holds the page url.
inline std::vector<LabeledDocument> load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<LabeledDocument> out;
    for (Label label : {Label::phishing, Label::benign}) {
        fs::path sub = dir / std::string(to_string(label));
        if (!fs::is_directory(sub)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(sub))
            if (e.is_regular_file() && (e.path().extension() == ".html" || e.path().extension() == ".htm"))
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream is(f, std::ios::binary);
            LabeledDocument d;
            d.id = std::string(to_string(label)) + "/" + f.filename().string();
            d.html.assign(std::istreambuf_iterator<char>(is), {});
            d.label = label;
            auto side = f;
            side.replace_extension(".url");
            if (std::ifstream us(side); us) std::getline(us, d.url);
            if (d.url.empty()) d.url = "https://" + f.stem().string() + ".invalid/";
            out.push_back(std::move(d));
        }
    }
    if (out.empty()) throw Error("no documents under " + dir.string() + " (expected phishing/ and benign/)");
    return out;
}

inline std::vector<TrainingExample> training_examples(const std::vector<LabeledDocument>& docs,
                                                      const PatchConfig& patches, const WindowConfig& wcfg) {
    std::vector<TrainingExample> out;
    for (size_t i = 0; i < docs.size(); ++i) {
        auto chunks = make_windows(tokenize(parse_html(docs[i].html, docs[i].url, patches)), wcfg, docs[i].label);
        if (chunks.empty()) out.push_back({{}, docs[i].label, i});
        // Merged views are what phase 2 scores; train on them too.
        if (wcfg.merge_enabled && chunks.size() > 1)
            out.push_back({merge_chunks(chunks, chunks.size()).tokens, docs[i].label, i});
        for (auto& c : chunks) out.push_back({std::move(c.tokens), docs[i].label, i});
    }
    return out;
}

struct EvalMetrics {
    Confusion confusion;
    double median_latency_ms = 0.0;
    size_t inconclusive = 0;

    double accuracy() const { return confusion.accuracy(); }
    double precision() const { return confusion.precision(); }
    double recall() const { return confusion.recall(); }
    double f1() const { return confusion.f1(); }

    nlohmann::json to_json() const {
        return {{"accuracy", accuracy()}, {"precision", precision()}, {"recall", recall()}, {"f1", f1()},
                {"tp", confusion.tp},     {"fp", confusion.fp},       {"tn", confusion.tn},  {"fn", confusion.fn},
                {"inconclusive", inconclusive}};
    }
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// End-to-end (parse + window + classify) per page. Pages whose scorer is
// unavailable are counted as inconclusive and left out of the confusion.
inline EvalMetrics evaluate(const Pipeline& pipeline, const std::vector<LabeledDocument>& docs) {
    EvalMetrics m;
    std::vector<double> latencies;
    for (const auto& d : docs) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            auto v = pipeline.classify_html(d.html, d.url);
            auto t1 = std::chrono::steady_clock::now();
            latencies.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            m.confusion.add(d.label, v.label);
        } catch (const ScorerUnavailable&) {
            ++m.inconclusive;
        }
    }
    m.median_latency_ms = median(latencies);
    return m;
}

inline nlohmann::json verdict_to_json(const Verdict& v) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& p : v.chunk_trace)
        chunks.push_back({{"chunk", p.chunk_index}, {"confidence", p.confidence}, {"label", to_string(p.label)}});
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& m : v.merge_trace) merges.push_back({{"k", m.k}, {"confidence", m.confidence}});
    return {{"label", to_string(v.label)},
            {"confidence", v.confidence},
            {"decided_by", to_string(v.decided_by)},
            {"chunk_trace", chunks},
            {"merge_trace", merges}};
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    v.label = label_from_string(j.at("label").get<std::string>()).value_or(Label::benign);
    v.confidence = j.at("confidence").get<double>();
    v.decided_by = decided_by_from_string(j.at("decided_by").get<std::string>());
    for (const auto& c : j.at("chunk_trace"))
        v.chunk_trace.push_back({c.at("chunk").get<size_t>(), c.at("confidence").get<double>(),
                                 label_from_string(c.at("label").get<std::string>()).value_or(Label::benign)});
    for (const auto& m : j.at("merge_trace")) v.merge_trace.push_back({m.at("k").get<size_t>(), m.at("confidence").get<double>()});
    v.scorer_calls = v.chunk_trace.size() + v.merge_trace.size();
    return v;
}

}  // namespace phishscope
