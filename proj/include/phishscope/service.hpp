#pragma once

// Pipelined scanning: ingest -> [queue] -> fetch workers -> [queue] ->
// classify workers -> store. Queue bounds give back-pressure; the token
// bucket paces fetches.

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "phishscope/concurrency.hpp"
#include "phishscope/ingest.hpp"
#include "phishscope/scanner.hpp"
#include "phishscope/store.hpp"

namespace phishscope {

struct ServiceStats {
    size_t scanned = 0;
    size_t phishing = 0;
    size_t benign = 0;
    size_t inconclusive = 0;
    size_t fetch_failed = 0;
    size_t cache_hits = 0;

    nlohmann::json to_json() const {
        return {{"scanned", scanned},           {"phishing", phishing},         {"benign", benign},
                {"inconclusive", inconclusive}, {"fetch_failed", fetch_failed}, {"cache_hits", cache_hits}};
    }
};

class ScanService {
public:
    // The producer pushes candidates through the callback; false means stop.
    using Producer = std::function<void(const std::function<bool(const Candidate&)>&)>;
    using OnRecord = std::function<void(const ScanRecord&)>;

    ScanService(Scanner& scanner, BlocklistStore& store, size_t workers = 4, size_t queue_capacity = 256,
                double rate_per_sec = 30.0)
        : scanner_(scanner), store_(store), workers_(std::max<size_t>(1, workers)), cap_(queue_capacity), rate_(rate_per_sec) {}

    ServiceStats run(const Producer& produce, const OnRecord& on_record = {}) {
        struct Fetched {
            Candidate cand;
            std::optional<FetchResult> page;
            std::string error;
        };
        BoundedQueue<Candidate> to_fetch(cap_);
        BoundedQueue<Fetched> to_classify(cap_);
        TokenBucket bucket(rate_);
        ServiceStats stats;
        std::mutex stats_mu;
        std::exception_ptr failure;
        std::mutex failure_mu;
        auto fail = [&](std::exception_ptr e) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = e;
            to_fetch.close();
            to_classify.close();
        };

        std::vector<std::thread> fetchers, classifiers;
        for (size_t i = 0; i < workers_; ++i)
            fetchers.emplace_back([&] {
                while (auto c = to_fetch.pop()) {
                    Fetched f{std::move(*c), std::nullopt, {}};
                    if (!scanner_.cached(f.cand.url)) {
                        bucket.acquire();
                        try {
                            f.page = scanner_.fetcher().fetch({f.cand.url});
                        } catch (const FetchError& e) {
                            f.error = e.what();
                        } catch (...) {
                            fail(std::current_exception());
                            return;
                        }
                    } else {
                        std::lock_guard lock(stats_mu);
                        ++stats.cache_hits;
                    }
                    if (!to_classify.push(std::move(f))) return;
                }
            });
        for (size_t i = 0; i < workers_; ++i)
            classifiers.emplace_back([&] {
                while (auto f = to_classify.pop()) {
                    try {
                        auto r = scanner_.scan_fetched(f->cand.url, f->cand.discovered_at, std::move(f->page), f->error);
                        store_.put(r);
                        {
                            std::lock_guard lock(stats_mu);
                            ++stats.scanned;
                            if (r.status == ScanStatus::fetch_failed) ++stats.fetch_failed;
                            else if (r.status == ScanStatus::inconclusive) ++stats.inconclusive;
                            else if (r.verdict.label == Label::phishing) ++stats.phishing;
                            else ++stats.benign;
                        }
                        if (on_record) on_record(r);
                    } catch (...) {
                        fail(std::current_exception());
                        return;
                    }
                }
            });

        try {
            produce([&](const Candidate& c) { return to_fetch.push(c); });
        } catch (...) {
            fail(std::current_exception());
        }
        to_fetch.close();
        for (auto& t : fetchers) t.join();
        to_classify.close();
        for (auto& t : classifiers) t.join();
        if (failure) std::rethrow_exception(failure);
        return stats;
    }

    ServiceStats run_replay(const std::filesystem::path& file, Ingestor& ingest, const Clock& clock = system_now,
                            const OnRecord& on_record = {}) {
        return run([&](const auto& push) { replay_file(file, ingest, clock, push); }, on_record);
    }

private:
    Scanner& scanner_;
    BlocklistStore& store_;
    size_t workers_;
    size_t cap_;
    double rate_;
};

}  // namespace phishscope
