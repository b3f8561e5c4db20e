#pragma once

// One url end to end: fetch, parse, classify, profile, then the two
// follow-up rules for benign pages and a warning for phishing ones.
//
// Link follow-up: benign with confidence in [band_low, threshold) scans the
// first max_children distinct http(s) links of the page, one level deep.
// Form follow-through: a still-benign page with a form whose action survived
// the parser is submitted once with placeholder data and the response scored.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phishscope/concurrency.hpp"
#include "phishscope/detector.hpp"
#include "phishscope/explainer.hpp"
#include "phishscope/fetcher.hpp"
#include "phishscope/profiler.hpp"
#include "phishscope/report.hpp"
#include "phishscope/store.hpp"
#include "phishscope/timefmt.hpp"

namespace phishscope {

struct ScanConfig {
    double band_low = 0.3;
    size_t max_children = 5;
    bool form_followthrough = true;
    std::chrono::milliseconds benign_cache_ttl = std::chrono::hours(24);
    ExplainConfig explain;
    size_t top_k = 3;
};

// Dummy values by input type, then by name hints. Never real data.
inline std::string placeholder_value(std::string_view type, std::string_view name) {
    auto t = text::to_lower_ascii(type);
    auto n = text::to_lower_ascii(name);
    auto has = [&](std::string_view k) { return n.find(k) != std::string::npos; };
    if (t == "email" || has("mail")) return "jane.doe@example.com";
    if (t == "password" || has("pass") || has("pwd")) return "Placeholder-2024!";
    if (t == "tel" || has("phone") || has("mobile")) return "+15555550100";
    if (has("card") || has("ccnum")) return "4111111111111111";
    if (has("cvv") || has("cvc")) return "123";
    if (has("zip") || has("postal")) return "12345";
    if (t == "number") return "12345";
    if (t == "checkbox" || t == "radio") return "on";
    if (has("user") || has("login") || has("account")) return "jane.doe";
    return "Jane Doe";
}

struct FormTarget {
    std::string url;
    std::string method;
    std::vector<std::pair<std::string, std::string>> fields;
};

// First form with a usable action. The parsed document carries no nesting,
// so a form owns the inputs that follow it up to the next form.
inline std::optional<FormTarget> form_target(const ParsedDocument& doc, std::string_view page_url) {
    auto base = Url::parse(page_url);
    if (!base) return std::nullopt;
    for (size_t i = 0; i < doc.elements.size(); ++i) {
        const auto& f = doc.elements[i];
        if (f.kind != TagKind::form) continue;
        const auto* action = f.attribute("action");
        if (!action || *action == kSuspiciousSink || is_sink_token(*action)) continue;
        auto dest = base->resolve(*action);
        if (!dest || !dest->has_authority() || (dest->scheme != "http" && dest->scheme != "https")) continue;
        dest->fragment.clear();
        FormTarget t;
        t.url = dest->to_string();
        const auto* method = f.attribute("method");
        t.method = method && text::iequals(text::trim(*method), "post") ? "POST" : "GET";
        for (size_t j = i + 1; j < doc.elements.size() && doc.elements[j].kind != TagKind::form; ++j) {
            const auto& e = doc.elements[j];
            if (e.kind != TagKind::input) continue;
            const auto* name = e.attribute("name");
            const auto* type = e.attribute("type");
            std::string ty = type ? text::to_lower_ascii(*type) : "text";
            if (!name || name->empty() || ty == "submit" || ty == "button" || ty == "image" || ty == "reset") continue;
            t.fields.emplace_back(*name, ty == "hidden" ? "" : placeholder_value(ty, *name));
        }
        return t;
    }
    return std::nullopt;
}

// Distinct http(s) links in document order, excluding sinks and the page itself.
inline std::vector<std::string> follow_candidates(const ParsedDocument& doc, std::string_view page_url, size_t limit) {
    std::vector<std::string> out;
    auto base = Url::parse(page_url);
    if (!base || limit == 0) return out;
    auto self = *base;
    self.fragment.clear();
    std::string self_s = self.to_string();
    std::set<std::string> seen;
    for (const auto& e : doc.elements) {
        if (e.kind != TagKind::a && e.kind != TagKind::area) continue;
        const auto* href = e.attribute("href");
        if (!href || is_sink_token(*href) || *href == kSuspiciousSink) continue;
        auto u = base->resolve(*href);
        if (!u || !u->has_authority() || (u->scheme != "http" && u->scheme != "https")) continue;
        u->fragment.clear();
        auto s = u->to_string();
        if (s == self_s || !seen.insert(s).second) continue;
        out.push_back(std::move(s));
        if (out.size() == limit) break;
    }
    return out;
}

class Scanner {
public:
    Scanner(Pipeline pipeline, std::shared_ptr<const Fetcher> fetcher, ScanConfig cfg = {},
            std::shared_ptr<const WarningGenerator> generator = nullptr, Clock clock = system_now,
            std::vector<ReportSink> sinks = {})
        : pipeline_(std::move(pipeline)),
          fetcher_(std::move(fetcher)),
          cfg_(std::move(cfg)),
          generator_(std::move(generator)),
          clock_(std::move(clock)),
          sinks_(std::move(sinks)) {
        if (!pipeline_.scorer || !fetcher_) throw Error("scanner needs a scorer and a fetcher");
        if (cfg_.band_low < 0.0 || cfg_.band_low > pipeline_.threshold) throw Error("follow-up band must sit below the threshold");
    }

    ScanRecord scan_url(const std::string& url, std::optional<Timestamp> discovered_at = {}) {
        auto guard = locks_.hold(url);
        Timestamp disc = discovered_at.value_or(clock_());
        if (auto hit = cached(url)) {
            hit->discovered_at = disc;
            return *hit;
        }
        std::optional<FetchResult> page;
        std::string error;
        try {
            page = fetcher_->fetch({url});
        } catch (const FetchError& e) {
            error = e.what();
        }
        return finish(url, disc, std::move(page), error);
    }

    // Second half of scan_url for callers that fetched already (the pipelined
    // service). page empty means the fetch failed with `error`.
    ScanRecord scan_fetched(const std::string& url, Timestamp discovered_at, std::optional<FetchResult> page,
                            const std::string& error) {
        auto guard = locks_.hold(url);
        if (auto hit = cached(url)) {
            hit->discovered_at = discovered_at;
            return *hit;
        }
        return finish(url, discovered_at, std::move(page), error);
    }

    // Cached benign record, if fresh. Costs no fetch and no scorer query.
    std::optional<ScanRecord> cached(const std::string& url) {
        std::lock_guard lock(cache_mu_);
        auto it = cache_.find(url);
        if (it == cache_.end()) return std::nullopt;
        if (clock_() - it->second.scanned_at >= cfg_.benign_cache_ttl) {
            cache_.erase(it);
            return std::nullopt;
        }
        return it->second;
    }

    size_t cache_size() const {
        std::lock_guard lock(cache_mu_);
        return cache_.size();
    }

    const Pipeline& pipeline() const { return pipeline_; }
    const Fetcher& fetcher() const { return *fetcher_; }
    const ScanConfig& config() const { return cfg_; }

private:
    struct Analysis {
        FetchResult fetch;
        ParsedDocument doc;
        Verdict verdict;
    };

    Analysis analyse(FetchResult fetched) const {
        Analysis a;
        a.doc = pipeline_.parse(fetched.body, fetched.final_url);
        a.verdict = pipeline_.classify(a.doc);
        a.fetch = std::move(fetched);
        return a;
    }

    FollowedPage visit(const FetchRequest& req, std::optional<Analysis>& keep) const {
        FollowedPage f;
        f.url = req.url;
        keep.reset();
        try {
            keep = analyse(fetcher_->fetch(req));
            f.verdict = keep->verdict;
        } catch (const FetchError& e) {
            f.error = e.what();
        }
        return f;
    }

    ScanRecord finish(const std::string& url, Timestamp disc, std::optional<FetchResult> page, const std::string& error) {
        ScanRecord r;
        r.url = url;
        r.discovered_at = disc;
        if (!page) {
            r.status = ScanStatus::fetch_failed;
            r.error = error;
            r.scanned_at = clock_();
            return r;
        }
        r.final_url = page->final_url;
        r.ip = page->ip;
        r.evasion = profile(page->body);
        try {
            auto main = analyse(std::move(*page));
            r.verdict = main.verdict;
            const Analysis* flagged = r.verdict.label == Label::phishing ? &main : nullptr;
            std::optional<Analysis> child;

            if (!flagged && r.verdict.confidence >= cfg_.band_low && r.verdict.confidence < pipeline_.threshold) {
                for (const auto& link : follow_candidates(main.doc, main.fetch.final_url, cfg_.max_children)) {
                    r.followed_links.push_back(visit({link}, child));
                    if (child && child->verdict.label == Label::phishing) {
                        r.verdict = child->verdict;
                        r.decided_by = "link";
                        flagged = &*child;
                        break;
                    }
                }
            }
            std::optional<Analysis> dest;
            if (!flagged && cfg_.form_followthrough) {
                if (auto target = form_target(main.doc, main.fetch.final_url)) {
                    r.form_followthrough = visit({target->url, target->method, target->fields}, dest);
                    if (dest && dest->verdict.label == Label::phishing) {
                        r.verdict = dest->verdict;
                        r.decided_by = "form";
                        flagged = &*dest;
                    }
                }
            }
            if (flagged) {
                r.warning = explain(flagged->doc, flagged->fetch.final_url, pipeline_, cfg_.explain, generator_.get(), cfg_.top_k);
                r.scanned_at = clock_();
                if (!sinks_.empty()) queue_report(r, render_parsed_text(flagged->doc), sinks_);
            } else {
                r.scanned_at = clock_();
                std::lock_guard lock(cache_mu_);
                cache_[url] = r;
            }
        } catch (const ScorerUnavailable& e) {
            r.status = ScanStatus::inconclusive;
            r.error = e.what();
            r.warning.reset();
            r.scanned_at = clock_();
        }
        return r;
    }

    Pipeline pipeline_;
    std::shared_ptr<const Fetcher> fetcher_;
    ScanConfig cfg_;
    std::shared_ptr<const WarningGenerator> generator_;
    Clock clock_;
    std::vector<ReportSink> sinks_;
    KeyedMutex locks_;
    mutable std::mutex cache_mu_;
    std::map<std::string, ScanRecord> cache_;
};

}  // namespace phishscope
