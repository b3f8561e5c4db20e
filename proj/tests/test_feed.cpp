#include <gtest/gtest.h>

#include <mutex>
#include <set>
#include <thread>

#include "phishscope/feed.hpp"

using namespace phishscope;
namespace beast = boost::beast;
namespace ws = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

nlohmann::json cert_update(std::vector<std::string> domains) {
    return {{"message_type", "certificate_update"},
            {"data", {{"update_type", "X509LogEntry"}, {"leaf_cert", {{"all_domains", domains}, {"subject", {{"CN", domains[0]}}}}}}}};
}

// Local websocket server. Each accepted session gets its scripted messages,
// then the server either drops it or holds it open until told to finish.
class MockFeedServer {
public:
    MockFeedServer(std::vector<std::vector<std::string>> sessions, bool hold_last)
        : sessions_(std::move(sessions)), hold_last_(hold_last), acceptor_(ioc_, {boost::asio::ip::make_address("127.0.0.1"), 0}) {
        thread_ = std::thread([this] { serve(); });
    }
    ~MockFeedServer() {
        release();
        thread_.join();
    }
    int port() const { return acceptor_.local_endpoint().port(); }
    void release() { released_ = true; }
    size_t accepted() const { return accepted_; }

private:
    void serve() {
        for (size_t i = 0; i < sessions_.size(); ++i) {
            tcp::socket sock(ioc_);
            boost::system::error_code ec;
            acceptor_.accept(sock, ec);
            if (ec) return;
            ++accepted_;
            ws::stream<tcp::socket> s(std::move(sock));
            s.accept(ec);
            if (ec) continue;
            for (const auto& m : sessions_[i]) s.write(boost::asio::buffer(m), ec);
            if (i + 1 == sessions_.size() && hold_last_)
                while (!released_) std::this_thread::sleep_for(std::chrono::milliseconds(5));
            // dropping the socket without a close frame, like a flaky feed
        }
    }

    std::vector<std::vector<std::string>> sessions_;
    bool hold_last_;
    std::atomic<bool> released_{false};
    std::atomic<size_t> accepted_{0};
    boost::asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::thread thread_;
};

FeedConfig fast_config(int port) {
    FeedConfig c;
    c.endpoint = "ws://127.0.0.1:" + std::to_string(port) + "/";
    c.backoff_initial = std::chrono::milliseconds(10);
    c.backoff_max = std::chrono::milliseconds(80);
    c.connect_timeout = std::chrono::milliseconds(2000);
    c.idle_timeout = std::chrono::milliseconds(5000);
    return c;
}

}  // namespace

TEST(FeedMessages, BothShapes) {
    EXPECT_EQ(feed_message_domains(cert_update({"a.example", "*.a.example"})),
              (std::vector<std::string>{"a.example", "*.a.example"}));
    nlohmann::json dns = {{"message_type", "dns_entries"}, {"data", {"x.example", "y.example"}}};
    EXPECT_EQ(feed_message_domains(dns), (std::vector<std::string>{"x.example", "y.example"}));
    EXPECT_TRUE(feed_message_domains({{"message_type", "heartbeat"}, {"timestamp", 1.0}}).empty());
    EXPECT_TRUE(feed_message_domains(nlohmann::json::array()).empty());
    EXPECT_TRUE(feed_message_domains({{"message_type", "certificate_update"}, {"data", {{"leaf_cert", 3}}}}).empty());
}

TEST(FeedClient, RejectsNonWebsocketEndpoints) {
    FeedConfig c;
    c.endpoint = "https://certstream.example/";
    EXPECT_THROW(FeedClient{c}, Error);
}

// Three sessions, each dropped by the server: the client reconnects every
// time, and the overlap between sessions is not emitted twice.
TEST(FeedClient, ReconnectsAfterDropsWithoutDuplicates) {
    std::vector<std::vector<std::string>> sessions = {
        {cert_update({"a.example", "*.b.example"}).dump(), "not json", cert_update({"c.example"}).dump()},
        {cert_update({"c.example"}).dump(), nlohmann::json{{"message_type", "dns_entries"}, {"data", {"d.example"}}}.dump(),
         cert_update({"a.example"}).dump()},
        {cert_update({"e.example", "www.paypal.com"}).dump()},
    };
    MockFeedServer server(sessions, false);
    FeedClient feed(fast_config(server.port()));
    Allowlist allow;
    allow.add("paypal.com");
    Ingestor ingest(allow);
    std::mutex mu;
    std::vector<std::string> got;
    std::atomic<bool> stop{false};
    std::thread t([&] {
        ingest_feed(
            feed, ingest, system_now,
            [&](const Candidate& c) {
                std::lock_guard lock(mu);
                got.push_back(c.url);
            },
            stop);
    });
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (std::chrono::steady_clock::now() < deadline) {
        {
            std::lock_guard lock(mu);
            if (got.size() >= 5 && server.accepted() == 3) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));  // let anything stray arrive
    stop = true;
    t.join();

    std::vector<std::string> expect = {"https://a.example/", "https://b.example/", "https://c.example/", "https://d.example/",
                                       "https://e.example/"};
    EXPECT_EQ(got, expect);
    EXPECT_GE(feed.stats().connects.load(), 3u);
    EXPECT_GE(feed.stats().disconnects.load(), 3u);
    EXPECT_EQ(feed.stats().bad_messages.load(), 1u);
    EXPECT_EQ(ingest.stats().duplicates, 2u);
    EXPECT_EQ(ingest.stats().allowlisted, 1u);
}

TEST(FeedClient, StopInterruptsAnIdleSession) {
    MockFeedServer server({{cert_update({"a.example"}).dump()}}, true);
    FeedClient feed(fast_config(server.port()));
    std::atomic<bool> stop{false};
    std::atomic<int> seen{0};
    std::thread t([&] { feed.run([&](const std::string&) { ++seen; }, stop); });
    while (seen == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    auto t0 = std::chrono::steady_clock::now();
    stop = true;
    t.join();
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(500));
    EXPECT_EQ(feed.stats().disconnects.load(), 0u);
    server.release();
}

TEST(FeedClient, UnreachableEndpointBacksOffUntilStopped) {
    int port;
    {
        boost::asio::io_context ioc;
        tcp::acceptor a(ioc, {boost::asio::ip::make_address("127.0.0.1"), 0});
        port = a.local_endpoint().port();
    }  // closed again: connections are refused
    FeedClient feed(fast_config(port));
    std::atomic<bool> stop{false};
    std::thread t([&] { feed.run([](const std::string&) {}, stop); });
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    stop = true;
    t.join();
    // 10, 20, 40, 80, 80 ... ms: a handful of attempts, not a hot loop
    EXPECT_GE(feed.stats().disconnects.load(), 3u);
    EXPECT_LE(feed.stats().disconnects.load(), 12u);
    EXPECT_EQ(feed.stats().connects.load(), 0u);
}
