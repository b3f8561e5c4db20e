#pragma once

// Certificate-transparency websocket consumer. Understands the full
// certificate_update messages and the lighter dns_entries form. Disconnects
// reconnect with exponential backoff; duplicates across reconnects are the
// Ingestor's job.

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/ssl.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/ssl.hpp>
#include <boost/beast/websocket.hpp>
#include <boost/beast/websocket/ssl.hpp>
#include <json.hpp>

#include "phishscope/core.hpp"
#include "phishscope/ingest.hpp"
#include "phishscope/url.hpp"

namespace phishscope {

inline std::vector<std::string> feed_message_domains(const nlohmann::json& msg) {
    std::vector<std::string> out;
    if (!msg.is_object()) return out;
    auto type = msg.value("message_type", "");
    const auto data = msg.find("data");
    if (data == msg.end()) return out;
    if (type == "dns_entries" && data->is_array()) {
        for (const auto& d : *data)
            if (d.is_string()) out.push_back(d.get<std::string>());
    } else if (type == "certificate_update" && data->is_object()) {
        auto leaf = data->find("leaf_cert");
        if (leaf != data->end() && leaf->is_object()) {
            auto all = leaf->find("all_domains");
            if (all != leaf->end() && all->is_array())
                for (const auto& d : *all)
                    if (d.is_string()) out.push_back(d.get<std::string>());
        }
    }
    return out;
}

struct FeedStats {
    std::atomic<size_t> connects{0};
    std::atomic<size_t> disconnects{0};
    std::atomic<size_t> messages{0};
    std::atomic<size_t> bad_messages{0};
};

class FeedClient {
public:
    using OnDomain = std::function<void(const std::string& domain)>;

    explicit FeedClient(FeedConfig cfg) : cfg_(std::move(cfg)) {
        auto u = Url::parse(cfg_.endpoint);
        if (!u || !u->has_authority() || (u->scheme != "ws" && u->scheme != "wss"))
            throw Error("feed endpoint must be ws:// or wss://: " + cfg_.endpoint);
        url_ = *u;
    }

    // Runs until stop is set. Every disconnect sleeps the current backoff,
    // which doubles up to backoff_max and resets after a delivered message.
    void run(const OnDomain& on_domain, const std::atomic<bool>& stop) {
        auto backoff = cfg_.backoff_initial;
        while (!stop) {
            bool delivered = false;
            try {
                if (url_.scheme == "wss") session_tls(on_domain, stop, delivered);
                else session_plain(on_domain, stop, delivered);
            } catch (const std::exception&) {
            }
            if (stop) break;
            ++stats_.disconnects;
            if (delivered) backoff = cfg_.backoff_initial;
            sleep_checked(backoff, stop);
            backoff = std::min(cfg_.backoff_max, backoff * 2);
        }
    }

    const FeedStats& stats() const { return stats_; }

private:
    using tcp = boost::asio::ip::tcp;

    static void sleep_checked(std::chrono::milliseconds d, const std::atomic<bool>& stop) {
        auto until = std::chrono::steady_clock::now() + d;
        while (!stop && std::chrono::steady_clock::now() < until)
            std::this_thread::sleep_for(std::min(d, std::chrono::milliseconds(20)));
    }

    // Drive one async operation to completion, cancelling the socket when stop
    // is raised.
    template <class Lowest, class Start>
    static void await(boost::asio::io_context& ioc, Lowest& lowest, const std::atomic<bool>& stop, Start start) {
        bool done = false;
        boost::system::error_code ec;
        start([&](boost::system::error_code e) {
            ec = e;
            done = true;
        });
        ioc.restart();
        while (!done) {
            ioc.run_for(std::chrono::milliseconds(50));
            if (!done && stop) lowest.cancel();
        }
        if (ec) throw boost::system::system_error(ec);
    }

    std::string port() const { return url_.port ? std::to_string(url_.port) : (url_.scheme == "wss" ? "443" : "80"); }
    std::string target() const { return (url_.path.empty() ? "/" : url_.path) + (url_.query.empty() ? "" : "?" + url_.query); }

    // The websocket layer owns timeouts once the tcp connect is done.
    template <class WS>
    void handshake(boost::asio::io_context& ioc, WS& ws, const std::atomic<bool>& stop) {
        auto& lowest = boost::beast::get_lowest_layer(ws);
        lowest.expires_never();
        boost::beast::websocket::stream_base::timeout opt{};
        opt.handshake_timeout = cfg_.connect_timeout;
        opt.idle_timeout = cfg_.idle_timeout;
        opt.keep_alive_pings = true;
        ws.set_option(opt);
        std::string host = url_.host + (url_.port ? ":" + port() : "");
        await(ioc, lowest, stop, [&](auto done) {
            ws.async_handshake(host, target(), [done](boost::system::error_code e) mutable { done(e); });
        });
    }

    template <class WS>
    void read_loop(boost::asio::io_context& ioc, WS& ws, const OnDomain& on_domain, const std::atomic<bool>& stop,
                   bool& delivered) {
        auto& lowest = boost::beast::get_lowest_layer(ws);
        ++stats_.connects;
        boost::beast::flat_buffer buf;
        while (!stop) {
            await(ioc, lowest, stop, [&](auto done) {
                ws.async_read(buf, [done](boost::system::error_code e, size_t) mutable { done(e); });
            });
            ++stats_.messages;
            std::string text = boost::beast::buffers_to_string(buf.data());
            buf.consume(buf.size());
            nlohmann::json msg = nlohmann::json::parse(text, nullptr, false);
            if (msg.is_discarded()) {
                ++stats_.bad_messages;
                continue;
            }
            for (const auto& d : feed_message_domains(msg)) {
                on_domain(d);
                delivered = true;
            }
        }
        boost::system::error_code ignore;
        ws.close(boost::beast::websocket::close_code::normal, ignore);
    }

    void session_plain(const OnDomain& on_domain, const std::atomic<bool>& stop, bool& delivered) {
        boost::asio::io_context ioc;
        tcp::resolver resolver(ioc);
        boost::beast::websocket::stream<boost::beast::tcp_stream> ws(ioc);
        auto& lowest = boost::beast::get_lowest_layer(ws);
        auto endpoints = resolver.resolve(url_.host, port());
        lowest.expires_after(cfg_.connect_timeout);
        await(ioc, lowest, stop, [&](auto done) {
            lowest.async_connect(endpoints, [done](boost::system::error_code e, const tcp::endpoint&) mutable { done(e); });
        });
        handshake(ioc, ws, stop);
        read_loop(ioc, ws, on_domain, stop, delivered);
    }

    void session_tls(const OnDomain& on_domain, const std::atomic<bool>& stop, bool& delivered) {
        boost::asio::io_context ioc;
        boost::asio::ssl::context ctx(boost::asio::ssl::context::tls_client);
        ctx.set_default_verify_paths();
        ctx.set_verify_mode(boost::asio::ssl::verify_peer);
        tcp::resolver resolver(ioc);
        boost::beast::websocket::stream<boost::beast::ssl_stream<boost::beast::tcp_stream>> ws(ioc, ctx);
        auto& lowest = boost::beast::get_lowest_layer(ws);
        auto endpoints = resolver.resolve(url_.host, port());
        if (!SSL_set_tlsext_host_name(ws.next_layer().native_handle(), url_.host.c_str()))
            throw Error("cannot set SNI for " + url_.host);
        lowest.expires_after(cfg_.connect_timeout);
        await(ioc, lowest, stop, [&](auto done) {
            lowest.async_connect(endpoints, [done](boost::system::error_code e, const tcp::endpoint&) mutable { done(e); });
        });
        await(ioc, lowest, stop, [&](auto done) {
            ws.next_layer().async_handshake(boost::asio::ssl::stream_base::client,
                                            [done](boost::system::error_code e) mutable { done(e); });
        });
        handshake(ioc, ws, stop);
        read_loop(ioc, ws, on_domain, stop, delivered);
    }

    FeedConfig cfg_;
    Url url_;
    FeedStats stats_;
};

// Live feed into an Ingestor; each admitted candidate goes to sink.
inline void ingest_feed(FeedClient& feed, Ingestor& ingest, const Clock& clock,
                        const std::function<void(const Candidate&)>& sink, const std::atomic<bool>& stop) {
    feed.run(
        [&](const std::string& domain) {
            if (auto c = ingest.offer(domain, clock())) sink(*c);
        },
        stop);
}

}  // namespace phishscope
