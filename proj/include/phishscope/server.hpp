#pragma once

// Scan API over HTTP. Every body is JSON carrying a "schema" tag:
//   POST /scan {"url": ...}        -> phishscope.scan_record/1
//   GET  /records?category=&label=&status=&since=&until=&page=&page_size=
//                                  -> phishscope.records/1
//   GET  /record/{url}             -> phishscope.scan_record/1 (url percent-encoded)
//   GET  /health                   -> phishscope.health/1
// Errors come back as phishscope.error/1 with a 4xx/5xx status.

#include <atomic>
#include <string>

#include "phishscope/scanner.hpp"
#include "phishscope/store.hpp"

#include <httplib.h>
#include <json.hpp>

namespace phishscope {

inline constexpr std::string_view kHealthSchema = "phishscope.health/1";
inline constexpr std::string_view kErrorSchema = "phishscope.error/1";
inline constexpr size_t kMaxPageSize = 1000;

inline RecordFilter record_filter_from_query(const httplib::Request& req, size_t& page, size_t& page_size) {
    RecordFilter f;
    auto param = [&](const char* k) -> std::optional<std::string> {
        if (!req.has_param(k)) return std::nullopt;
        auto v = req.get_param_value(k);
        return v.empty() ? std::nullopt : std::optional<std::string>(v);
    };
    if (auto v = param("category")) {
        f.category = evasion_category_from_string(*v);
        if (!f.category) throw MalformedInput("unknown category " + *v);
    }
    if (auto v = param("label")) {
        f.label = label_from_string(*v);
        if (!f.label) throw MalformedInput("unknown label " + *v);
    }
    if (auto v = param("status")) {
        f.status = scan_status_from_string(*v);
        if (!f.status) throw MalformedInput("unknown status " + *v);
    }
    if (auto v = param("since")) {
        f.since = parse_time(*v);
        if (!f.since) throw MalformedInput("bad since " + *v);
    }
    if (auto v = param("until")) {
        f.until = parse_time(*v);
        if (!f.until) throw MalformedInput("bad until " + *v);
    }
    auto number = [&](const char* k, size_t def) {
        auto v = param(k);
        if (!v) return def;
        try {
            size_t pos = 0;
            long long n = std::stoll(*v, &pos);
            if (pos != v->size() || n < 1) throw MalformedInput("");
            return static_cast<size_t>(n);
        } catch (...) {
            throw MalformedInput(std::string("bad ") + k + " " + *v);
        }
    };
    page = number("page", 1);
    page_size = std::min(number("page_size", 100), kMaxPageSize);
    return f;
}

class ApiServer {
public:
    ApiServer(Scanner& scanner, BlocklistStore& store) : scanner_(scanner), store_(store) {
        srv_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        srv_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        srv_.Post("/scan", [this](const httplib::Request& req, httplib::Response& res) { handle_scan(req, res); });
        srv_.Get("/records", [this](const httplib::Request& req, httplib::Response& res) { handle_records(req, res); });
        srv_.Get(R"(/record/(.+))", [this](const httplib::Request& req, httplib::Response& res) { handle_record(req, res); });
        srv_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200,
                  {{"schema", kHealthSchema},
                   {"status", "ok"},
                   {"records", store_.size()},
                   {"scorer", scanner_.pipeline().scorer->name()},
                   {"scans_served", scans_.load()}});
        });
        srv_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            reply(res, 500, {{"schema", kErrorSchema}, {"error", what}});
        });
    }

    // Port 0 picks a free one. Returns the bound port or -1.
    int bind(const std::string& host, int port) {
        if (port == 0) return srv_.bind_to_any_port(host);
        return srv_.bind_to_port(host, port) ? port : -1;
    }
    bool listen_after_bind() { return srv_.listen_after_bind(); }
    void wait_until_ready() { srv_.wait_until_ready(); }
    void stop() { srv_.stop(); }
    httplib::Server& http() { return srv_; }

private:
    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace), "application/json");
    }
    static void error(httplib::Response& res, int status, const std::string& what) {
        reply(res, status, {{"schema", kErrorSchema}, {"error", what}});
    }

    void handle_scan(const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("url") || !body["url"].is_string())
            return error(res, 400, "expected {\"url\": \"...\"}");
        auto url = canonical_candidate(body["url"].get<std::string>());
        if (!url) return error(res, 400, "not an http(s) url: " + body["url"].get<std::string>());
        auto record = scanner_.scan_url(*url);
        store_.put(record);
        ++scans_;
        reply(res, 200, record.to_json());
    }

    void handle_records(const httplib::Request& req, httplib::Response& res) {
        size_t page = 1, page_size = 100;
        RecordFilter f;
        try {
            f = record_filter_from_query(req, page, page_size);
        } catch (const MalformedInput& e) {
            return error(res, 400, e.what());
        }
        reply(res, 200, store_.list(f, page, page_size).to_json());
    }

    void handle_record(const httplib::Request& req, httplib::Response& res) {
        std::string raw = req.matches[1];
        auto rec = store_.get(raw);
        if (!rec)
            if (auto canon = canonical_candidate(raw)) rec = store_.get(*canon);
        if (!rec) return error(res, 404, "no record for " + raw);
        reply(res, 200, rec->to_json());
    }

    Scanner& scanner_;
    BlocklistStore& store_;
    httplib::Server srv_;
    std::atomic<size_t> scans_{0};
};

}  // namespace phishscope
