#pragma once

// Scorer living in another process. Line-delimited JSON over the child's
// stdin/stdout: the child first prints a handshake line
//   {"protocol":"phishscope-scorer","version":1}
// then answers every {"id":N,"text":"..."} with {"id":N,"confidence":x}.
// Timeouts, EOF, bad lines: ScorerUnavailable. A failed adapter stays failed.

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/core.hpp"
#include "phishscope/scorer.hpp"

namespace phishscope {

inline constexpr std::string_view kScorerProtocol = "phishscope-scorer";
inline constexpr int kScorerProtocolVersion = 1;

struct ExternalScorerConfig {
    std::vector<std::string> command;  // argv, command[0] looked up on PATH
    std::chrono::milliseconds timeout{10000};
};

class ExternalScorer : public ChunkScorer {
public:
    explicit ExternalScorer(ExternalScorerConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.command.empty()) throw Error("external scorer needs a command");
        ::signal(SIGPIPE, SIG_IGN);
        spawn();
        try {
            std::string hello = read_line();
            try {
                auto j = nlohmann::json::parse(hello);
                if (j.at("protocol").get<std::string>() != kScorerProtocol ||
                    j.at("version").get<int>() != kScorerProtocolVersion)
                    fail("unsupported scorer handshake: " + hello);
            } catch (const nlohmann::json::exception&) {
                fail("bad scorer handshake: " + hello);
            }
        } catch (...) {
            shutdown();
            throw;
        }
    }

    ExternalScorer(const ExternalScorer&) = delete;
    ExternalScorer& operator=(const ExternalScorer&) = delete;

    ~ExternalScorer() override { shutdown(); }

    double score(const std::vector<std::string>& tokens) const override {
        std::lock_guard lock(mu_);
        if (dead_) throw ScorerUnavailable("external scorer unavailable: " + why_);
        std::string text;
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (i) text += ' ';
            text += tokens[i];
        }
        uint64_t id = next_id_++;
        nlohmann::json req = {{"id", id}, {"text", text}};
        write_line(req.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
        for (;;) {
            std::string line = read_line();
            try {
                auto j = nlohmann::json::parse(line);
                if (j.at("id").get<uint64_t>() != id) continue;  // stale reply to a timed-out request
                double c = j.at("confidence").get<double>();
                if (!(c >= 0.0 && c <= 1.0)) fail("confidence out of range: " + line);
                return c;
            } catch (const nlohmann::json::exception&) {
                fail("bad scorer reply: " + line);
            }
        }
    }

    std::string name() const override { return "external:" + cfg_.command.front(); }

private:
    [[noreturn]] void fail(const std::string& why) const {
        dead_ = true;
        why_ = why;
        throw ScorerUnavailable("external scorer unavailable: " + why);
    }

    void spawn() {
        int in[2], out[2];
        if (::pipe(in) != 0 || ::pipe(out) != 0) throw ScorerUnavailable("pipe: " + std::string(std::strerror(errno)));
        std::vector<char*> argv;
        for (auto& a : cfg_.command) argv.push_back(a.data());
        argv.push_back(nullptr);
        pid_ = ::fork();
        if (pid_ < 0) throw ScorerUnavailable("fork: " + std::string(std::strerror(errno)));
        if (pid_ == 0) {
            ::dup2(in[0], STDIN_FILENO);
            ::dup2(out[1], STDOUT_FILENO);
            ::close(in[0]);
            ::close(in[1]);
            ::close(out[0]);
            ::close(out[1]);
            ::execvp(argv[0], argv.data());
            ::_exit(127);
        }
        ::close(in[0]);
        ::close(out[1]);
        to_child_ = in[1];
        from_child_ = out[0];
    }

    void shutdown() {
        if (to_child_ >= 0) ::close(to_child_);
        if (from_child_ >= 0) ::close(from_child_);
        to_child_ = from_child_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            ::waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }

    void write_line(const std::string& s) const {
        std::string buf = s + "\n";
        size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = ::write(to_child_, buf.data() + off, buf.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) fail("write failed");
            off += static_cast<size_t>(n);
        }
    }

    std::string read_line() const {
        auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
        for (;;) {
            if (auto nl = pending_.find('\n'); nl != std::string::npos) {
                std::string line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                return line;
            }
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) fail("timed out after " + std::to_string(cfg_.timeout.count()) + " ms");
            pollfd p{from_child_, POLLIN, 0};
            int r = ::poll(&p, 1, static_cast<int>(left.count()));
            if (r < 0 && errno == EINTR) continue;
            if (r == 0) fail("timed out after " + std::to_string(cfg_.timeout.count()) + " ms");
            char buf[4096];
            ssize_t n = ::read(from_child_, buf, sizeof buf);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) fail("scorer process closed its output");
            pending_.append(buf, static_cast<size_t>(n));
        }
    }

    ExternalScorerConfig cfg_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::mutex mu_;
    mutable std::string pending_;
    mutable uint64_t next_id_ = 1;
    mutable bool dead_ = false;
    mutable std::string why_;
};

}  // namespace phishscope
