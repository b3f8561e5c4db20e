#pragma once

// Candidate URLs from a replay file or the live feed, deduplicated over a
// sliding window and filtered by an allowlist of well-known domains.

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>

#include "phishscope/core.hpp"
#include "phishscope/timefmt.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

// Live certificate-transparency feed settings (consumed by feed.hpp).
struct FeedConfig {
    std::string endpoint = "wss://certstream.calidog.io/";
    std::chrono::milliseconds backoff_initial{1000};
    std::chrono::milliseconds backoff_max{60000};
    std::chrono::milliseconds connect_timeout{15000};
    std::chrono::milliseconds idle_timeout{60000};
};

struct Candidate {
    std::string url;
    Timestamp discovered_at;
};

// Bare domains (possibly wildcard certificate names) become https://domain/.
// Fragments are dropped; scheme and host are lowercased by Url::parse.
inline std::optional<std::string> canonical_candidate(std::string_view raw) {
    auto s = text::trim(raw);
    if (s.empty()) return std::nullopt;
    std::string str(s);
    if (str.find("://") == std::string::npos) {
        while (str.starts_with("*.")) str.erase(0, 2);
        str = "https://" + str;
    }
    auto u = Url::parse(str);
    if (!u || !u->has_authority() || (u->scheme != "http" && u->scheme != "https")) return std::nullopt;
    if (u->host.find('*') != std::string::npos || u->host.find('.') == std::string::npos) return std::nullopt;
    u->fragment.clear();
    if (u->path.empty()) u->path = "/";
    return u->to_string();
}

class Allowlist {
public:
    Allowlist() = default;

    // One domain per line, or "rank,domain" rows from a top-sites list.
    static Allowlist load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw Error("cannot read allowlist " + path.string());
        Allowlist a;
        std::string line;
        while (std::getline(is, line)) {
            auto t = text::trim(line);
            if (t.empty() || t.front() == '#') continue;
            if (auto comma = t.rfind(','); comma != std::string_view::npos) t = text::trim(t.substr(comma + 1));
            a.add(t);
        }
        return a;
    }

    void add(std::string_view domain) {
        auto d = text::to_lower_ascii(text::trim(domain));
        while (!d.empty() && d.back() == '.') d.pop_back();
        if (!d.empty()) domains_.insert(d);
    }

    // host equals an entry or is a subdomain of one.
    bool contains(std::string_view host) const {
        std::string h = text::to_lower_ascii(host);
        for (;;) {
            if (domains_.count(h)) return true;
            auto dot = h.find('.');
            if (dot == std::string::npos) return false;
            h.erase(0, dot + 1);
        }
    }

    size_t size() const { return domains_.size(); }

private:
    std::set<std::string> domains_;
};

class Deduper {
public:
    explicit Deduper(std::chrono::milliseconds window = std::chrono::hours(24)) : window_(window) {}

    // True the first time a url is seen inside the window.
    bool admit(const std::string& url, Timestamp t) {
        std::lock_guard lock(mu_);
        if (seen_.size() > 4 * last_prune_size_ + 1024) prune(t);
        auto it = seen_.find(url);
        if (it != seen_.end() && t - it->second < window_) return false;
        seen_[url] = t;
        return true;
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return seen_.size();
    }

private:
    void prune(Timestamp now) {
        for (auto it = seen_.begin(); it != seen_.end();)
            it = now - it->second >= window_ ? seen_.erase(it) : std::next(it);
        last_prune_size_ = seen_.size();
    }

    std::chrono::milliseconds window_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Timestamp> seen_;
    size_t last_prune_size_ = 0;
};

struct IngestStats {
    size_t offered = 0;
    size_t emitted = 0;
    size_t duplicates = 0;
    size_t allowlisted = 0;
    size_t malformed = 0;
};

// Shared by the replay reader and the live feed. Thread-safe.
class Ingestor {
public:
    using Trace = std::function<void(std::string_view what, std::string_view url)>;

    explicit Ingestor(Allowlist allow = {}, std::chrono::milliseconds window = std::chrono::hours(24), Trace trace = {})
        : allow_(std::move(allow)), dedup_(window), trace_(std::move(trace)) {}

    std::optional<Candidate> offer(std::string_view raw, Timestamp t) {
        bump(&IngestStats::offered);
        auto url = canonical_candidate(raw);
        if (!url) {
            bump(&IngestStats::malformed);
            note("malformed", raw);
            return std::nullopt;
        }
        if (allow_.contains(host_of(*url))) {
            bump(&IngestStats::allowlisted);
            note("allowlisted", *url);
            return std::nullopt;
        }
        if (!dedup_.admit(*url, t)) {
            bump(&IngestStats::duplicates);
            return std::nullopt;
        }
        bump(&IngestStats::emitted);
        return Candidate{*url, t};
    }

    IngestStats stats() const {
        std::lock_guard lock(mu_);
        return stats_;
    }

private:
    void bump(size_t IngestStats::*field) {
        std::lock_guard lock(mu_);
        ++(stats_.*field);
    }
    void note(std::string_view what, std::string_view url) {
        if (trace_) trace_(what, url);
    }

    Allowlist allow_;
    Deduper dedup_;
    Trace trace_;
    mutable std::mutex mu_;
    IngestStats stats_;
};

// Replay file: one url per line, optionally with a timestamp before or after
// it (whitespace or comma separated). Lines without one get clock(). The sink
// returns false to stop early.
inline void replay_file(const std::filesystem::path& path, Ingestor& ingest, const Clock& clock,
                        const std::function<bool(const Candidate&)>& sink) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read replay file " + path.string());
    std::string line;
    while (std::getline(is, line)) {
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::string_view url = t;
        std::optional<Timestamp> ts;
        auto sep = t.find_first_of(" \t,");
        if (sep != std::string_view::npos) {
            auto a = text::trim(t.substr(0, sep));
            auto b = text::trim(t.substr(sep + 1));
            if (auto pa = parse_time(a)) {
                ts = pa;
                url = b;
            } else if (auto pb = parse_time(b)) {
                ts = pb;
                url = a;
            } else {
                url = a;
            }
        }
        if (auto c = ingest.offer(url, ts ? *ts : clock()))
            if (!sink(*c)) return;
    }
}

}  // namespace phishscope
