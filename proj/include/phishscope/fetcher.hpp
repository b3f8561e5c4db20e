#pragma once

// Page fetching for the scan service. Redirects are followed by hand so the
// hop limit and the size cap apply to every hop.

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>

#include "phishscope/core.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

struct FetchLimits {
    std::chrono::milliseconds timeout{15000};
    size_t max_bytes = 5 * 1024 * 1024;
    int max_redirects = 5;
    bool verify_tls = false;  // phishing kits rarely have valid chains; we still want the page
    std::string user_agent = "Mozilla/5.0 (X11; Linux x86_64) phishscope/1";
};

struct FetchRequest {
    std::string url;
    std::string method = "GET";
    std::vector<std::pair<std::string, std::string>> form;  // urlencoded into query (GET) or body (POST)
};

struct FetchResult {
    std::string requested_url;
    std::string final_url;
    int status = 0;
    std::string content_type;
    std::string body;
    std::optional<std::string> ip;
    int redirects = 0;
};

class Fetcher {
public:
    virtual ~Fetcher() = default;
    // Throws FetchError on transport failure, HTTP >= 400, cap or hop limit.
    virtual FetchResult fetch(const FetchRequest& req) const = 0;
};

inline std::optional<std::string> resolve_ip(const std::string& host) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string h = host;
    if (h.size() > 2 && h.front() == '[' && h.back() == ']') h = h.substr(1, h.size() - 2);
    if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res) return std::nullopt;
    char buf[INET6_ADDRSTRLEN] = {0};
    std::optional<std::string> out;
    for (auto* p = res; p && !out; p = p->ai_next) {
        if (p->ai_family == AF_INET)
            out = ::inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(p->ai_addr)->sin_addr, buf, sizeof buf);
        else if (p->ai_family == AF_INET6)
            out = ::inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(p->ai_addr)->sin6_addr, buf, sizeof buf);
    }
    ::freeaddrinfo(res);
    return out;
}

inline std::string form_urlencode(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string out;
    for (const auto& [k, v] : fields) {
        if (!out.empty()) out += '&';
        out += httplib::detail::encode_query_param(k) + "=" + httplib::detail::encode_query_param(v);
    }
    return out;
}

class HttpFetcher : public Fetcher {
public:
    explicit HttpFetcher(FetchLimits limits = {}) : limits_(std::move(limits)) {}

    FetchResult fetch(const FetchRequest& request) const override {
        FetchResult out;
        out.requested_url = request.url;
        auto deadline = std::chrono::steady_clock::now() + limits_.timeout;
        auto url = Url::parse(request.url);
        if (!url || !url->has_authority() || (url->scheme != "http" && url->scheme != "https"))
            throw FetchError("not an http(s) url: " + request.url);
        std::string method = text::iequals(request.method, "post") ? "POST" : "GET";
        std::string body;
        if (!request.form.empty()) {
            if (method == "GET") url->query = form_urlencode(request.form);
            else body = form_urlencode(request.form);
        }
        out.ip = resolve_ip(url->host);

        for (int hop = 0;; ++hop) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw FetchError("timed out fetching " + request.url);
            httplib::Client cli(url->origin());
            auto secs = std::chrono::duration_cast<std::chrono::seconds>(left);
            auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(left - secs);
            cli.set_connection_timeout(secs.count(), usecs.count());
            cli.set_read_timeout(secs.count(), usecs.count());
            cli.set_write_timeout(secs.count(), usecs.count());
            cli.set_follow_location(false);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
            cli.enable_server_certificate_verification(limits_.verify_tls);
#endif
            httplib::Request req;
            req.method = method;
            req.path = (url->path.empty() ? "/" : url->path) + (url->query.empty() ? "" : "?" + url->query);
            req.headers.emplace("User-Agent", limits_.user_agent);
            req.headers.emplace("Accept", "text/html,application/xhtml+xml,*/*;q=0.8");
            if (method == "POST") {
                req.body = body;
                req.headers.emplace("Content-Type", "application/x-www-form-urlencoded");
            }
            std::string page;
            bool too_big = false;
            req.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
                if (page.size() + n > limits_.max_bytes) {
                    too_big = true;
                    return false;
                }
                page.append(data, n);
                return std::chrono::steady_clock::now() < deadline;
            };
            auto res = cli.send(req);
            if (too_big) throw FetchError("response exceeds " + std::to_string(limits_.max_bytes) + " bytes: " + url->to_string());
            if (!res) throw FetchError("fetch failed for " + url->to_string() + ": " + httplib::to_string(res.error()));
            int status = res->status;
            if (status >= 300 && status < 400 && res->has_header("Location")) {
                if (hop >= limits_.max_redirects)
                    throw FetchError("more than " + std::to_string(limits_.max_redirects) + " redirects from " + request.url);
                auto next = url->resolve(res->get_header_value("Location"));
                if (!next || !next->has_authority()) throw FetchError("bad redirect target from " + url->to_string());
                next->fragment.clear();
                if (status == 301 || status == 302 || status == 303) {
                    method = "GET";
                    body.clear();
                }
                if (next->host != url->host) out.ip = resolve_ip(next->host);
                *url = *next;
                ++out.redirects;
                continue;
            }
            if (status >= 400) throw FetchError("HTTP " + std::to_string(status) + " for " + url->to_string());
            out.status = status;
            out.final_url = url->to_string();
            out.content_type = res->get_header_value("Content-Type");
            out.body = std::move(page);
            return out;
        }
    }

    const FetchLimits& limits() const { return limits_; }

private:
    FetchLimits limits_;
};

}  // namespace phishscope
