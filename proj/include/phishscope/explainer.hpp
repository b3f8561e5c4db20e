#pragma once

// Element-level importance by perturbation (mask whole elements, refit a
// proximity-weighted linear surrogate) and the structured warning built from
// the top elements.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

// <resolv.h> (pulled in by httplib) defines _res, which Eigen uses as a name
#pragma push_macro("_res")
#undef _res
#include <Eigen/Dense>
#pragma pop_macro("_res")
#include <json.hpp>

#include "phishscope/detector.hpp"
#include "phishscope/parser.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

struct TagImportance {
    size_t order_index = 0;
    double weight = 0.0;
    std::vector<std::string> tokens;
};

struct ExplainConfig {
    size_t n_samples = 500;
    uint64_t seed = 0;
    double kernel_width = 0.25;  // over the masked fraction
    double ridge = 1.0;
};

using DocumentScorer = std::function<double(const ParsedDocument&)>;

inline DocumentScorer pipeline_document_scorer(const Pipeline& p) {
    return [&p](const ParsedDocument& d) { return p.classify(d).confidence; };
}

inline ParsedDocument with_elements(const ParsedDocument& doc, const std::vector<char>& keep) {
    ParsedDocument out;
    out.url = doc.url;
    out.stylesheet_rules = doc.stylesheet_rules;
    out.patch_trace = doc.patch_trace;
    for (size_t i = 0; i < doc.elements.size(); ++i)
        if (keep[i]) out.elements.push_back(doc.elements[i]);
    return out;
}

namespace explain_detail {

// Weighted ridge with an unpenalized intercept. Uses the dual form when there
// are more elements than samples.
inline Eigen::VectorXd weighted_ridge(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                      double lambda) {
    double wsum = w.sum();
    Eigen::RowVectorXd zmean = (w.asDiagonal() * Z).colwise().sum() / wsum;
    double ymean = w.dot(y) / wsum;
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd X = sw.asDiagonal() * (Z.rowwise() - zmean);
    Eigen::VectorXd t = sw.cwiseProduct(y.array().matrix() - Eigen::VectorXd::Constant(y.size(), ymean));
    const auto n = X.rows(), p = X.cols();
    if (p <= n) {
        Eigen::MatrixXd A = X.transpose() * X;
        A.diagonal().array() += lambda;
        return A.ldlt().solve(X.transpose() * t);
    }
    Eigen::MatrixXd K = X * X.transpose();
    K.diagonal().array() += lambda;
    return X.transpose() * K.ldlt().solve(t);
}

}  // namespace explain_detail

// Elements with positive surrogate weight, descending. Ties are broken by
// document order.
inline std::vector<TagImportance> tag_importance(const ParsedDocument& doc, const DocumentScorer& score,
                                                 const ExplainConfig& cfg = {}) {
    const size_t m = doc.elements.size();
    if (m == 0) throw DegenerateExplanation("document has no elements");
    const size_t n = std::max<size_t>(cfg.n_samples, 2);
    std::mt19937_64 rng(cfg.seed ^ 0x6c696d65ULL);
    Eigen::MatrixXd Z(n, m);
    Eigen::VectorXd y(n), w(n);
    std::vector<size_t> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = i;
    for (size_t s = 0; s < n; ++s) {
        std::vector<char> keep(m, 1);
        size_t masked = 0;
        if (s > 0) {  // sample 0 is the unmodified page
            masked = 1 + static_cast<size_t>(rng() % m);
            std::shuffle(order.begin(), order.end(), rng);
            for (size_t k = 0; k < masked; ++k) keep[order[k]] = 0;
        }
        for (size_t i = 0; i < m; ++i) Z(s, i) = keep[i];
        y(s) = score(with_elements(doc, keep));
        double d = double(masked) / double(m);
        w(s) = std::sqrt(std::exp(-(d * d) / (cfg.kernel_width * cfg.kernel_width)));
    }
    if (y.maxCoeff() - y.minCoeff() < 1e-12) throw DegenerateExplanation("every perturbation scored the same");
    Eigen::VectorXd beta = explain_detail::weighted_ridge(Z, y, w, cfg.ridge);

    std::vector<TagImportance> out;
    auto tokens = tokenize(doc);
    for (size_t i = 0; i < m; ++i) {
        if (!(beta(static_cast<Eigen::Index>(i)) > 0.0)) continue;
        TagImportance t;
        t.order_index = doc.elements[i].order_index;
        t.weight = beta(static_cast<Eigen::Index>(i));
        for (size_t k = 0; k < tokens.tokens.size(); ++k)
            if (tokens.element_of[k] == t.order_index) t.tokens.push_back(tokens.tokens[k]);
        out.push_back(std::move(t));
    }
    std::stable_sort(out.begin(), out.end(), [](const TagImportance& a, const TagImportance& b) { return a.weight > b.weight; });
    return out;
}

inline std::vector<TagImportance> top_tags(std::vector<TagImportance> ranked, size_t k = 3) {
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

// ---- codebook ----

struct CodebookTerm {
    std::string name;
    std::string definition;
};

inline const std::vector<CodebookTerm>& default_codebook() {
    static const std::vector<CodebookTerm> terms = {
        {"credential-solicitation", "The page asks for passwords, card numbers or other secrets."},
        {"urgency-language", "Wording that pressures the visitor to act immediately."},
        {"non-functional-links", "Links that point nowhere, so the page only looks complete."},
        {"brand-imitation-text", "Text that borrows the name or voice of a well-known organisation."},
        {"deceptive-redirect", "Script or markup that sends the visitor somewhere other than it claims."},
        {"hidden-interactive-element", "A control or field that is present but kept out of sight."},
        {"grammatical-errors", "Spelling, grammar or punctuation mistakes unusual for the claimed sender."},
        {"poor-security-indicators", "Weak transport or trust signals, such as plain http."},
        {"mismatched-urls", "Addresses that do not belong to the organisation the page imitates."},
        {"suspicious-markup", "An element the model weighted heavily that fits no narrower term."}};
    return terms;
}

inline bool in_codebook(std::string_view name, const std::vector<CodebookTerm>& codebook = default_codebook()) {
    return std::any_of(codebook.begin(), codebook.end(), [&](const CodebookTerm& t) { return t.name == name; });
}

inline constexpr std::string_view kUrgencyLexicon[] = {
    "urgent",    "immediately", "suspended", "suspend",  "limited",  "unusual activity", "verify your",
    "expire",    "within 24",   "within 48", "locked",   "unlock",   "action required",  "confirm your",
    "restore",   "closed",      "last warning", "unauthorized", "security alert"};

inline constexpr std::string_view kBrandLexicon[] = {
    "paypal",   "microsoft", "office 365", "outlook",  "apple",   "icloud",  "netflix",  "amazon",  "facebook",
    "instagram", "whatsapp", "google",     "gmail",    "chase",   "wells fargo", "bank of america", "dhl", "fedex",
    "usps",     "coinbase",  "binance",    "metamask", "dropbox", "docusign", "adobe",   "linkedin", "yahoo",
    "steam",    "santander", "hsbc",       "barclays", "citibank", "ups",    "american express", "spotify"};

inline std::optional<std::string> lexicon_hit(std::string_view lower_text, const std::string_view* begin,
                                              const std::string_view* end) {
    for (auto it = begin; it != end; ++it) {
        size_t p = lower_text.find(*it);
        while (p != std::string_view::npos) {
            bool left = p == 0 || !std::isalnum(static_cast<unsigned char>(lower_text[p - 1]));
            size_t e = p + it->size();
            bool right = e >= lower_text.size() || !std::isalnum(static_cast<unsigned char>(lower_text[e]));
            if (left && right) return std::string(*it);
            p = lower_text.find(*it, p + 1);
        }
    }
    return std::nullopt;
}

inline std::optional<std::string> brand_in(std::string_view lower_text) {
    return lexicon_hit(lower_text, std::begin(kBrandLexicon), std::end(kBrandLexicon));
}

inline std::optional<std::string> urgency_in(std::string_view lower_text) {
    return lexicon_hit(lower_text, std::begin(kUrgencyLexicon), std::end(kUrgencyLexicon));
}

// ---- warnings ----

inline constexpr std::string_view kWarningSchema = "phishscope.warning/1";

struct WarningFeature {
    std::string name;
    std::string location;
    std::string description;
    size_t element = 0;  // order_index the location resolves to
    bool novel = false;

    bool operator==(const WarningFeature&) const = default;
};

struct ExplainableWarning {
    std::string url;
    std::optional<std::string> target_brand_guess;
    std::vector<WarningFeature> features;
    std::optional<std::string> screenshot;
    std::string generator = "template";  // "external" or "template"
    std::string fallback_reason;
    std::string prompt_version;

    bool operator==(const ExplainableWarning&) const = default;

    nlohmann::json to_json() const {
        nlohmann::json f = nlohmann::json::array();
        for (const auto& x : features)
            f.push_back({{"name", x.name}, {"location", x.location}, {"description", x.description},
                         {"element", x.element}, {"novel", x.novel}});
        nlohmann::json j = {{"schema", kWarningSchema}, {"url", url},       {"features", f},
                            {"generator", generator}, {"prompt_version", prompt_version}};
        j["target_brand_guess"] = target_brand_guess ? nlohmann::json(*target_brand_guess) : nlohmann::json(nullptr);
        j["screenshot"] = screenshot ? nlohmann::json(*screenshot) : nlohmann::json(nullptr);
        if (!fallback_reason.empty()) j["fallback_reason"] = fallback_reason;
        return j;
    }

    static ExplainableWarning from_json(const nlohmann::json& j) {
        if (j.value("schema", "") != kWarningSchema) throw MalformedInput("unsupported warning schema");
        ExplainableWarning w;
        w.url = j.at("url").get<std::string>();
        if (j.contains("target_brand_guess") && !j["target_brand_guess"].is_null())
            w.target_brand_guess = j["target_brand_guess"].get<std::string>();
        if (j.contains("screenshot") && !j["screenshot"].is_null()) w.screenshot = j["screenshot"].get<std::string>();
        w.generator = j.at("generator").get<std::string>();
        w.prompt_version = j.value("prompt_version", "");
        w.fallback_reason = j.value("fallback_reason", "");
        for (const auto& f : j.at("features"))
            w.features.push_back({f.at("name").get<std::string>(), f.at("location").get<std::string>(),
                                  f.at("description").get<std::string>(), f.value("element", size_t{0}),
                                  f.value("novel", false)});
        return w;
    }
};

inline const ParsedElement* element_by_order(const ParsedDocument& doc, size_t order_index) {
    for (const auto& e : doc.elements)
        if (e.order_index == order_index) return &e;
    return nullptr;
}

inline const std::string* element_attr(const ParsedElement& e, std::string_view name) { return e.attribute(name); }

// "sign-in form mid-page (element #12)"
inline std::string describe_location(const ParsedDocument& doc, const ParsedElement& e) {
    size_t pos = 0;
    for (size_t i = 0; i < doc.elements.size(); ++i)
        if (doc.elements[i].order_index == e.order_index) pos = i;
    double frac = doc.elements.size() > 1 ? double(pos) / double(doc.elements.size() - 1) : 0.0;
    std::string where = frac < 0.25 ? "near the top" : (frac > 0.75 ? "near the bottom" : "mid-page");
    std::string noun;
    switch (e.kind) {
        case TagKind::form: noun = "sign-in form"; break;
        case TagKind::input: {
            const auto* type = element_attr(e, "type");
            noun = (type && *type == "password") ? "password field" : "input field";
            break;
        }
        case TagKind::a: noun = "link"; break;
        case TagKind::button: noun = "button"; break;
        case TagKind::title: noun = "page title"; where = "in the browser tab"; break;
        case TagKind::h1:
        case TagKind::h2:
        case TagKind::h3: noun = "heading"; break;
        case TagKind::p: noun = "paragraph"; break;
        case TagKind::script: noun = "script"; break;
        case TagKind::footer: noun = "footer"; break;
        case TagKind::iframe: noun = "embedded frame"; break;
        default: noun = std::string(to_string(e.kind)) + " element"; break;
    }
    return noun + " " + where + " (element #" + std::to_string(e.order_index) + ")";
}

// order_index named by a location string, if it names an existing element.
inline std::optional<size_t> resolve_location(const ParsedDocument& doc, std::string_view location) {
    size_t p = location.rfind("#");
    if (p == std::string_view::npos) return std::nullopt;
    size_t i = p + 1, v = 0;
    bool any = false;
    while (i < location.size() && std::isdigit(static_cast<unsigned char>(location[i]))) {
        v = v * 10 + static_cast<size_t>(location[i] - '0');
        ++i;
        any = true;
    }
    if (!any || !element_by_order(doc, v)) return std::nullopt;
    return v;
}

inline std::optional<std::string> guess_brand(const ParsedDocument& doc) {
    for (const auto& e : doc.elements)
        if (e.kind == TagKind::title)
            if (auto b = brand_in(e.text)) return b;
    for (const auto& e : doc.elements)
        if (auto b = brand_in(e.text)) return b;
    return std::nullopt;
}

namespace explain_detail {

inline std::string excerpt(std::string_view s, size_t n = 60) {
    std::string out(s.substr(0, n));
    if (s.size() > n) out += "...";
    return out;
}

inline bool has_sink_href(const ParsedElement& e) {
    const auto* href = element_attr(e, "href");
    return e.kind == TagKind::a && (!href || is_sink_token(*href));
}

}  // namespace explain_detail

// Deterministic mapping from one element to a codebook feature.
inline WarningFeature template_feature(const ParsedDocument& doc, const ParsedElement& e, std::string_view url) {
    using explain_detail::excerpt;
    WarningFeature f;
    f.element = e.order_index;
    f.location = describe_location(doc, e);
    auto brand = brand_in(e.text);
    auto urgent = urgency_in(e.text);
    if (e.kind == TagKind::form || e.kind == TagKind::input) {
        f.name = "credential-solicitation";
        if (!brand) brand = guess_brand(doc);  // forms rarely name the brand themselves
        f.description = brand ? "A form asks for account details while presenting itself as " + *brand + "."
                              : "A form collects account details such as an email address and password.";
    } else if (urgent) {
        f.name = "urgency-language";
        f.description = "The text \"" + excerpt(e.text) + "\" pushes the visitor to act right away (\"" + *urgent + "\").";
    } else if (explain_detail::has_sink_href(e)) {
        f.name = "non-functional-links";
        f.description = "This link leads nowhere; it exists to make the page look complete.";
    } else if (brand) {
        f.name = "brand-imitation-text";
        f.description = "The page uses the name \"" + *brand + "\" to look like an official page.";
    } else if (e.kind == TagKind::a && element_attr(e, "href") && !url.empty()) {
        auto href = *element_attr(e, "href");
        auto base = Url::parse(url);
        auto r = base ? base->resolve(href) : Url::parse(href);
        if (r && base && !r->host.empty() && registrable_domain(r->host) != registrable_domain(base->host)) {
            f.name = "mismatched-urls";
            f.description = "The link points to " + r->host + ", which is not the site being visited.";
        }
    }
    if (f.name.empty() && Url::parse(url) && Url::parse(url)->scheme == "http" &&
        (e.kind == TagKind::form || e.kind == TagKind::button)) {
        f.name = "poor-security-indicators";
        f.description = "The page is served over plain http.";
    }
    if (f.name.empty()) {
        f.name = "suspicious-markup";
        f.description = "The detector weighted this " + std::string(to_string(e.kind)) + " element heavily" +
                        (e.text.empty() ? std::string(".") : ": \"" + excerpt(e.text) + "\".");
    }
    return f;
}

class WarningGenerator {
public:
    virtual ~WarningGenerator() = default;
    // Returns the raw structured reply; throws GeneratorUnavailable.
    virtual std::string complete(const std::string& prompt) const = 0;
};

inline constexpr std::string_view kPromptVersion = "warning-prompt/1";

inline std::string default_prompt_template() {
    return "You are a security assistant writing a warning for a page a phishing detector has flagged.\n"
           "URL: {url}\n"
           "The detector relied most on these elements of the parsed page:\n{top_tags}\n"
           "Full parsed page (one element per line):\n{parsed}\n"
           "Describe the visible features that make this page suspicious. Use feature names from this list:\n"
           "{codebook}\n"
           "If an important feature is not in the list you may name it, but prefer the list.\n"
           "Give each feature's location on the page using the element labels shown as (element #N).\n"
           "Reply only with JSON: {\"target_brand\": string or null, \"features\": [{\"name\": string, "
           "\"location\": string, \"description\": string}]}\n";
}

inline std::string build_prompt(const ParsedDocument& doc, std::string_view url, const std::vector<TagImportance>& top,
                                const std::vector<CodebookTerm>& codebook,
                                const std::string& prompt_template = default_prompt_template()) {
    std::string tags;
    for (const auto& t : top)
        if (const auto* e = element_by_order(doc, t.order_index))
            tags += "- " + render_element(*e) + "  (element #" + std::to_string(t.order_index) + ")\n";
    std::string parsed;
    for (const auto& e : doc.elements) parsed += "#" + std::to_string(e.order_index) + " " + render_element(e) + "\n";
    std::string cb;
    for (const auto& t : codebook) cb += "- " + t.name + ": " + t.definition + "\n";
    std::string out = prompt_template;
    auto sub = [&](std::string_view key, const std::string& v) {
        for (size_t p = out.find(key); p != std::string::npos; p = out.find(key, p + v.size())) out.replace(p, key.size(), v);
    };
    sub("{url}", std::string(url));
    sub("{top_tags}", tags);
    sub("{codebook}", cb);
    sub("{parsed}", parsed);
    return out;
}

inline ExplainableWarning template_warning(const ParsedDocument& doc, std::string_view url,
                                           const std::vector<TagImportance>& top) {
    ExplainableWarning w;
    w.url = std::string(url);
    w.generator = "template";
    w.target_brand_guess = guess_brand(doc);
    for (const auto& t : top) {
        const auto* e = element_by_order(doc, t.order_index);
        if (!e) continue;
        auto f = template_feature(doc, *e, url);
        bool dup = std::any_of(w.features.begin(), w.features.end(),
                               [&](const WarningFeature& g) { return g.name == f.name && g.element == f.element; });
        if (!dup) w.features.push_back(std::move(f));
    }
    return w;
}

// External mode validates names against the codebook (novel names are kept
// and flagged) and pins every location to an element; any failure falls back
// to the template.
inline ExplainableWarning build_warning(const ParsedDocument& doc, std::string_view url,
                                        const std::vector<TagImportance>& top,
                                        const std::vector<CodebookTerm>& codebook = default_codebook(),
                                        const WarningGenerator* generator = nullptr,
                                        const std::string& prompt_template = default_prompt_template()) {
    if (top.empty()) throw Error("build_warning needs at least one top tag");
    if (!generator) return template_warning(doc, url, top);
    try {
        auto reply = generator->complete(build_prompt(doc, url, top, codebook, prompt_template));
        auto j = nlohmann::json::parse(reply);
        ExplainableWarning w;
        w.url = std::string(url);
        w.generator = "external";
        w.prompt_version = std::string(kPromptVersion);
        if (j.contains("target_brand") && j["target_brand"].is_string()) w.target_brand_guess = j["target_brand"].get<std::string>();
        else w.target_brand_guess = guess_brand(doc);
        for (const auto& f : j.at("features")) {
            WarningFeature x;
            x.name = f.at("name").get<std::string>();
            x.description = f.value("description", "");
            x.novel = !in_codebook(x.name, codebook);
            auto loc = f.value("location", "");
            auto resolved = resolve_location(doc, loc);
            if (!resolved) {
                // pin to the first top element whose text the location quotes, else the top element
                resolved = top.front().order_index;
                auto lower = text::to_lower_ascii(loc);
                for (const auto& t : top)
                    if (const auto* e = element_by_order(doc, t.order_index);
                        e && !e->text.empty() && lower.find(e->text.substr(0, 24)) != std::string::npos) {
                        resolved = t.order_index;
                        break;
                    }
                loc = describe_location(doc, *element_by_order(doc, *resolved));
            }
            x.element = *resolved;
            x.location = loc;
            w.features.push_back(std::move(x));
        }
        if (w.features.empty()) throw GeneratorUnavailable("generator returned no features");
        return w;
    } catch (const std::exception& e) {
        auto w = template_warning(doc, url, top);
        w.fallback_reason = e.what();
        return w;
    }
}

// One-call path used by the scanner and CLI: importance, top-3, warning.
inline ExplainableWarning explain(const ParsedDocument& doc, std::string_view url, const Pipeline& pipeline,
                                  const ExplainConfig& cfg = {}, const WarningGenerator* generator = nullptr,
                                  size_t k = 3) {
    std::vector<TagImportance> top;
    try {
        top = top_tags(tag_importance(doc, pipeline_document_scorer(pipeline), cfg), k);
    } catch (const DegenerateExplanation&) {
    }
    if (top.empty()) {
        // no element moves the score: fall back to form/input elements, then the first element
        for (const auto& e : doc.elements)
            if (e.kind == TagKind::form || e.kind == TagKind::input) top.push_back({e.order_index, 0.0, {}});
        if (top.empty() && !doc.elements.empty()) top.push_back({doc.elements.front().order_index, 0.0, {}});
        if (top.size() > k) top.resize(k);
    }
    if (top.empty()) {
        ExplainableWarning w;
        w.url = std::string(url);
        return w;
    }
    return build_warning(doc, url, top, default_codebook(), generator);
}

}  // namespace phishscope
