#pragma once

// Report sinks: one payload file per sink for every phishing record. Nothing
// is submitted anywhere; an operator or a separate uploader picks them up.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/store.hpp"

namespace phishscope {

inline constexpr std::string_view kReportSchema = "phishscope.report/1";

struct ReportSink {
    std::string name;  // e.g. the blocklist the payload is meant for
    std::filesystem::path dir;
};

struct ReportPayload {
    std::string sink;
    std::string url;
    std::optional<std::string> ip;
    std::string discovered_at;
    double confidence = 0.0;
    std::string parsed_text;
    EvasionProfile evasion;
    std::optional<ExplainableWarning> warning;

    nlohmann::json to_json() const {
        return {{"schema", kReportSchema},
                {"sink", sink},
                {"url", url},
                {"ip", ip ? nlohmann::json(*ip) : nlohmann::json(nullptr)},
                {"discovered_at", discovered_at},
                {"evidence",
                 {{"confidence", confidence},
                  {"parsed_text", parsed_text},
                  {"evasion", evasion.to_json()},
                  {"warning", warning ? warning->to_json() : nlohmann::json(nullptr)}}}};
    }

    // Validates the schema tag and every required field.
    static ReportPayload from_json(const nlohmann::json& j) {
        try {
            if (j.at("schema").get<std::string>() != kReportSchema) throw MalformedInput("not a report payload");
            ReportPayload p;
            p.sink = j.at("sink").get<std::string>();
            p.url = j.at("url").get<std::string>();
            if (!j.at("ip").is_null()) p.ip = j.at("ip").get<std::string>();
            p.discovered_at = j.at("discovered_at").get<std::string>();
            if (!parse_time(p.discovered_at)) throw MalformedInput("bad discovered_at " + p.discovered_at);
            const auto& ev = j.at("evidence");
            p.confidence = ev.at("confidence").get<double>();
            if (p.confidence < 0.0 || p.confidence > 1.0) throw MalformedInput("confidence out of range");
            p.parsed_text = ev.at("parsed_text").get<std::string>();
            p.evasion = EvasionProfile::from_json(ev.at("evasion"));
            if (!ev.at("warning").is_null()) p.warning = ExplainableWarning::from_json(ev.at("warning"));
            if (p.url.empty() || p.sink.empty()) throw MalformedInput("empty url or sink");
            return p;
        } catch (const nlohmann::json::exception& e) {
            throw MalformedInput(std::string("malformed report payload: ") + e.what());
        }
    }
};

inline std::string report_file_name(const std::string& url) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(url)));
    return std::string(buf) + ".json";
}

// Writes <sink.dir>/<hash(url)>.json for each sink and returns the paths.
inline std::vector<std::filesystem::path> queue_report(const ScanRecord& record, const std::string& parsed_text,
                                                       const std::vector<ReportSink>& sinks) {
    if (record.verdict.label != Label::phishing) throw NotPhishing("only phishing records are reported: " + record.url);
    std::vector<std::filesystem::path> out;
    for (const auto& sink : sinks) {
        ReportPayload p{sink.name,  record.url,     record.ip,       format_time(record.discovered_at), record.verdict.confidence,
                        parsed_text, record.evasion, record.warning};
        std::filesystem::create_directories(sink.dir);
        auto path = sink.dir / report_file_name(record.url);
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << p.to_json().dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        if (!os) throw StorageError("cannot write report " + path.string());
        out.push_back(path);
    }
    return out;
}

}  // namespace phishscope
