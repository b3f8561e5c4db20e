#pragma once

// Scan records and the blocklist store. The store is an append-only JSONL
// file; the latest line per url wins. An empty path keeps it in memory.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/detector.hpp"
#include "phishscope/explainer.hpp"
#include "phishscope/profiler.hpp"
#include "phishscope/timefmt.hpp"

namespace phishscope {

inline constexpr std::string_view kScanRecordSchema = "phishscope.scan_record/1";
inline constexpr std::string_view kRecordsSchema = "phishscope.records/1";

enum class ScanStatus { completed, inconclusive, fetch_failed };

inline std::string_view to_string(ScanStatus s) {
    switch (s) {
        case ScanStatus::completed: return "completed";
        case ScanStatus::inconclusive: return "inconclusive";
        case ScanStatus::fetch_failed: return "fetch_failed";
    }
    return "inconclusive";
}

inline std::optional<ScanStatus> scan_status_from_string(std::string_view s) {
    if (s == "completed") return ScanStatus::completed;
    if (s == "inconclusive") return ScanStatus::inconclusive;
    if (s == "fetch_failed") return ScanStatus::fetch_failed;
    return std::nullopt;
}

// A page visited on behalf of another one (link follow-up or form submission).
struct FollowedPage {
    std::string url;
    Verdict verdict;
    std::string error;  // non-empty when it could not be fetched or scored

    nlohmann::json to_json() const {
        nlohmann::json j = {{"url", url}, {"verdict", verdict_to_json(verdict)}};
        if (!error.empty()) j["error"] = error;
        return j;
    }
    static FollowedPage from_json(const nlohmann::json& j) {
        return {j.at("url").get<std::string>(), verdict_from_json(j.at("verdict")), j.value("error", "")};
    }
};

struct ScanRecord {
    std::string url;
    std::string final_url;
    std::optional<std::string> ip;
    Timestamp discovered_at;
    Timestamp scanned_at;
    ScanStatus status = ScanStatus::completed;
    Verdict verdict;
    std::string decided_by = "page";  // page, link or form
    EvasionProfile evasion;
    std::optional<ExplainableWarning> warning;
    std::vector<FollowedPage> followed_links;
    std::optional<FollowedPage> form_followthrough;
    std::string error;

    nlohmann::json to_json() const {
        nlohmann::json links = nlohmann::json::array();
        for (const auto& l : followed_links) links.push_back(l.to_json());
        nlohmann::json j = {{"schema", kScanRecordSchema},
                            {"url", url},
                            {"final_url", final_url},
                            {"ip", ip ? nlohmann::json(*ip) : nlohmann::json(nullptr)},
                            {"discovered_at", format_time(discovered_at)},
                            {"scanned_at", format_time(scanned_at)},
                            {"status", to_string(status)},
                            {"verdict", verdict_to_json(verdict)},
                            {"decided_by", decided_by},
                            {"evasion", evasion.to_json()},
                            {"warning", warning ? warning->to_json() : nlohmann::json(nullptr)},
                            {"followed_links", links},
                            {"form_followthrough", form_followthrough ? form_followthrough->to_json() : nlohmann::json(nullptr)}};
        if (!error.empty()) j["error"] = error;
        return j;
    }

    static ScanRecord from_json(const nlohmann::json& j) {
        try {
            if (j.at("schema").get<std::string>() != kScanRecordSchema)
                throw MalformedInput("unsupported scan record schema " + j.at("schema").get<std::string>());
            ScanRecord r;
            r.url = j.at("url").get<std::string>();
            r.final_url = j.value("final_url", "");
            if (!j.at("ip").is_null()) r.ip = j.at("ip").get<std::string>();
            auto d = parse_time(j.at("discovered_at").get<std::string>());
            auto s = parse_time(j.at("scanned_at").get<std::string>());
            auto st = scan_status_from_string(j.at("status").get<std::string>());
            if (!d || !s || !st) throw MalformedInput("bad timestamp or status in scan record");
            r.discovered_at = *d;
            r.scanned_at = *s;
            r.status = *st;
            r.verdict = verdict_from_json(j.at("verdict"));
            r.decided_by = j.value("decided_by", "page");
            r.evasion = EvasionProfile::from_json(j.at("evasion"));
            if (!j.at("warning").is_null()) r.warning = ExplainableWarning::from_json(j.at("warning"));
            for (const auto& l : j.at("followed_links")) r.followed_links.push_back(FollowedPage::from_json(l));
            if (auto f = j.find("form_followthrough"); f != j.end() && !f->is_null()) r.form_followthrough = FollowedPage::from_json(*f);
            r.error = j.value("error", "");
            return r;
        } catch (const nlohmann::json::exception& e) {
            throw MalformedInput(std::string("malformed scan record: ") + e.what());
        }
    }
};

// Record content with the two timestamps blanked, for replay comparisons.
inline nlohmann::json timeless(const ScanRecord& r) {
    auto j = r.to_json();
    j.erase("discovered_at");
    j.erase("scanned_at");
    return j;
}

struct RecordFilter {
    std::optional<EvasionCategory> category;
    std::optional<Label> label;
    std::optional<ScanStatus> status;
    std::optional<Timestamp> since;  // inclusive
    std::optional<Timestamp> until;  // exclusive

    bool matches(const ScanRecord& r) const {
        if (category && r.evasion.category != *category) return false;
        if (label && r.verdict.label != *label) return false;
        if (status && r.status != *status) return false;
        if (since && r.discovered_at < *since) return false;
        if (until && r.discovered_at >= *until) return false;
        return true;
    }
};

struct RecordPage {
    std::vector<ScanRecord> records;
    size_t page = 1;
    size_t page_size = 100;
    size_t total = 0;

    size_t pages() const { return page_size ? (total + page_size - 1) / page_size : 0; }

    nlohmann::json to_json() const {
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& r : records) rs.push_back(r.to_json());
        return {{"schema", kRecordsSchema}, {"page", page},       {"page_size", page_size},
                {"total", total},           {"pages", pages()},   {"records", rs}};
    }
};

class BlocklistStore {
public:
    explicit BlocklistStore(std::filesystem::path path = {}) : path_(std::move(path)) {
        if (path_.empty()) return;
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        if (std::filesystem::exists(path_)) load();
        out_.open(path_, std::ios::app | std::ios::binary);
        if (!out_) throw StorageError("cannot open store " + path_.string());
    }

    void put(const ScanRecord& r) {
        std::lock_guard lock(mu_);
        if (out_.is_open()) {
            out_ << r.to_json().dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
            out_.flush();
            if (!out_) throw StorageError("write failed on " + path_.string());
        }
        index(r);
    }

    std::optional<ScanRecord> get(const std::string& url) const {
        std::lock_guard lock(mu_);
        auto it = latest_.find(url);
        if (it == latest_.end()) return std::nullopt;
        return it->second.record;
    }

    // Stable order: discovered_at, then first insertion. page is 1-based.
    RecordPage list(const RecordFilter& filter = {}, size_t page = 1, size_t page_size = 100) const {
        if (page == 0 || page_size == 0) throw Error("page and page_size start at 1");
        std::vector<const Entry*> hits;
        std::lock_guard lock(mu_);
        for (const auto& [url, e] : latest_)
            if (filter.matches(e.record)) hits.push_back(&e);
        std::sort(hits.begin(), hits.end(), [](const Entry* a, const Entry* b) {
            if (a->record.discovered_at != b->record.discovered_at) return a->record.discovered_at < b->record.discovered_at;
            return a->seq < b->seq;
        });
        RecordPage out;
        out.page = page;
        out.page_size = page_size;
        out.total = hits.size();
        for (size_t i = (page - 1) * page_size; i < hits.size() && i < page * page_size; ++i)
            out.records.push_back(hits[i]->record);
        return out;
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return latest_.size();
    }

    const std::filesystem::path& path() const { return path_; }

private:
    struct Entry {
        ScanRecord record;
        size_t seq = 0;
    };

    void index(const ScanRecord& r) {
        auto it = latest_.find(r.url);
        if (it == latest_.end()) latest_.emplace(r.url, Entry{r, next_seq_++});
        else it->second.record = r;
    }

    // A torn final line (crash mid-append) is dropped; anything else malformed
    // is an error.
    void load() {
        std::ifstream is(path_, std::ios::binary);
        if (!is) throw StorageError("cannot read store " + path_.string());
        std::vector<std::string> lines;
        for (std::string line; std::getline(is, line);)
            if (!text::trim(line).empty()) lines.push_back(std::move(line));
        for (size_t i = 0; i < lines.size(); ++i) {
            try {
                index(ScanRecord::from_json(nlohmann::json::parse(lines[i])));
            } catch (const std::exception& e) {
                if (i + 1 == lines.size()) break;
                throw StorageError("corrupt store line " + std::to_string(i + 1) + " in " + path_.string() + ": " + e.what());
            }
        }
    }

    std::filesystem::path path_;
    std::ofstream out_;
    mutable std::mutex mu_;
    std::map<std::string, Entry> latest_;
    size_t next_seq_ = 0;
};

}  // namespace phishscope
