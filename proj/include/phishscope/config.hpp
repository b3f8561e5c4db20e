#pragma once

// Service configuration: defaults, then a JSON file (merge patch), then
// PHISHSCOPE_* environment variables. Unknown keys in the file are errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phishscope/detector.hpp"
#include "phishscope/external_scorer.hpp"
#include "phishscope/fetcher.hpp"
#include "phishscope/generator_client.hpp"
#include "phishscope/ingest.hpp"
#include "phishscope/report.hpp"
#include "phishscope/scanner.hpp"

namespace phishscope {

struct ServiceConfig {
    double threshold = 0.5;
    WindowConfig window;
    PatchConfig patches;
    ScanConfig scan;
    FetchLimits fetch;
    std::string model;  // reference model file
    ExternalScorerConfig external_scorer;
    std::string store = "phishscope-store.jsonl";
    std::string allowlist;
    std::chrono::milliseconds dedup_window = std::chrono::hours(24);
    double rate_limit = 30.0;  // fetches per second, <= 0 for unlimited
    size_t workers = 4;
    size_t queue_capacity = 256;
    std::vector<ReportSink> sinks;
    GeneratorConfig generator;  // empty endpoint: template descriptions only
    FeedConfig feed;
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
};

namespace config_detail {

inline long long ms(std::chrono::milliseconds d) { return d.count(); }

inline void check_keys(const nlohmann::json& defaults, const nlohmann::json& given, const std::string& where) {
    if (!given.is_object() || !defaults.is_object()) return;
    for (auto it = given.begin(); it != given.end(); ++it) {
        auto d = defaults.find(it.key());
        if (d == defaults.end()) throw Error("unknown config key " + where + "/" + it.key());
        // sinks and scorer commands are free-form arrays
        if (d->is_object()) check_keys(*d, it.value(), where + "/" + it.key());
    }
}

inline bool parse_bool(std::string_view v) {
    auto s = text::to_lower_ascii(text::trim(v));
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw Error("expected a boolean, got " + std::string(v));
}

}  // namespace config_detail

inline nlohmann::json config_to_json(const ServiceConfig& c) {
    using config_detail::ms;
    nlohmann::json sinks = nlohmann::json::array();
    for (const auto& s : c.sinks) sinks.push_back({{"name", s.name}, {"dir", s.dir.string()}});
    return {
        {"threshold", c.threshold},
        {"window", {{"W", c.window.W}, {"S", c.window.S}, {"merge", c.window.merge_enabled}}},
        {"patches",
         {{"p1", c.patches.p1_hidden_attr},
          {"p2", c.patches.p2_css_display_none},
          {"p3", c.patches.p3_form_action_validation},
          {"p4_1", c.patches.p4_1_encoding_normalization},
          {"p6", c.patches.p6_title_script_guard},
          {"action_probe_mode", c.patches.action_probe_mode == ActionProbeMode::network ? "network" : "syntactic"}}},
        {"scan",
         {{"band_low", c.scan.band_low},
          {"max_children", c.scan.max_children},
          {"form_followthrough", c.scan.form_followthrough},
          {"benign_cache_ttl_ms", ms(c.scan.benign_cache_ttl)},
          {"explain_samples", c.scan.explain.n_samples},
          {"explain_seed", c.scan.explain.seed},
          {"top_k", c.scan.top_k}}},
        {"fetch",
         {{"timeout_ms", ms(c.fetch.timeout)}, {"max_bytes", c.fetch.max_bytes}, {"max_redirects", c.fetch.max_redirects},
          {"verify_tls", c.fetch.verify_tls}}},
        {"model", c.model},
        {"external_scorer", {{"command", c.external_scorer.command}, {"timeout_ms", ms(c.external_scorer.timeout)}}},
        {"store", c.store},
        {"allowlist", c.allowlist},
        {"dedup_window_ms", ms(c.dedup_window)},
        {"rate_limit", c.rate_limit},
        {"workers", c.workers},
        {"queue_capacity", c.queue_capacity},
        {"sinks", sinks},
        {"generator",
         {{"endpoint", c.generator.endpoint},
          {"model", c.generator.model},
          {"api_key", c.generator.api_key},
          {"timeout_ms", ms(c.generator.timeout)}}},
        {"feed",
         {{"endpoint", c.feed.endpoint},
          {"backoff_initial_ms", ms(c.feed.backoff_initial)},
          {"backoff_max_ms", ms(c.feed.backoff_max)}}},
        {"listen", {{"host", c.listen_host}, {"port", c.listen_port}}},
    };
}

inline ServiceConfig config_from_json(const nlohmann::json& j) {
    using std::chrono::milliseconds;
    try {
        ServiceConfig c;
        c.threshold = j.at("threshold").get<double>();
        c.window.W = j.at("window").at("W").get<size_t>();
        c.window.S = j.at("window").at("S").get<size_t>();
        c.window.merge_enabled = j.at("window").at("merge").get<bool>();
        c.window.validate();
        const auto& p = j.at("patches");
        c.patches.p1_hidden_attr = p.at("p1").get<bool>();
        c.patches.p2_css_display_none = p.at("p2").get<bool>();
        c.patches.p3_form_action_validation = p.at("p3").get<bool>();
        c.patches.p4_1_encoding_normalization = p.at("p4_1").get<bool>();
        c.patches.p6_title_script_guard = p.at("p6").get<bool>();
        auto mode = p.at("action_probe_mode").get<std::string>();
        if (mode != "syntactic" && mode != "network") throw Error("action_probe_mode must be syntactic or network");
        c.patches.action_probe_mode = mode == "network" ? ActionProbeMode::network : ActionProbeMode::syntactic;
        const auto& s = j.at("scan");
        c.scan.band_low = s.at("band_low").get<double>();
        c.scan.max_children = s.at("max_children").get<size_t>();
        c.scan.form_followthrough = s.at("form_followthrough").get<bool>();
        c.scan.benign_cache_ttl = milliseconds(s.at("benign_cache_ttl_ms").get<long long>());
        c.scan.explain.n_samples = s.at("explain_samples").get<size_t>();
        c.scan.explain.seed = s.at("explain_seed").get<uint64_t>();
        c.scan.top_k = s.at("top_k").get<size_t>();
        const auto& f = j.at("fetch");
        c.fetch.timeout = milliseconds(f.at("timeout_ms").get<long long>());
        c.fetch.max_bytes = f.at("max_bytes").get<size_t>();
        c.fetch.max_redirects = f.at("max_redirects").get<int>();
        c.fetch.verify_tls = f.at("verify_tls").get<bool>();
        c.model = j.at("model").get<std::string>();
        c.external_scorer.command = j.at("external_scorer").at("command").get<std::vector<std::string>>();
        c.external_scorer.timeout = milliseconds(j.at("external_scorer").at("timeout_ms").get<long long>());
        c.store = j.at("store").get<std::string>();
        c.allowlist = j.at("allowlist").get<std::string>();
        c.dedup_window = milliseconds(j.at("dedup_window_ms").get<long long>());
        c.rate_limit = j.at("rate_limit").get<double>();
        c.workers = std::max<size_t>(1, j.at("workers").get<size_t>());
        c.queue_capacity = std::max<size_t>(1, j.at("queue_capacity").get<size_t>());
        for (const auto& sk : j.at("sinks")) c.sinks.push_back({sk.at("name").get<std::string>(), sk.at("dir").get<std::string>()});
        const auto& g = j.at("generator");
        c.generator.endpoint = g.at("endpoint").get<std::string>();
        c.generator.model = g.at("model").get<std::string>();
        c.generator.api_key = g.at("api_key").get<std::string>();
        c.generator.timeout = milliseconds(g.at("timeout_ms").get<long long>());
        c.feed.endpoint = j.at("feed").at("endpoint").get<std::string>();
        c.feed.backoff_initial = milliseconds(j.at("feed").at("backoff_initial_ms").get<long long>());
        c.feed.backoff_max = milliseconds(j.at("feed").at("backoff_max_ms").get<long long>());
        c.listen_host = j.at("listen").at("host").get<std::string>();
        c.listen_port = j.at("listen").at("port").get<int>();
        if (c.threshold <= 0.0 || c.threshold >= 1.0) throw Error("threshold must be in (0, 1)");
        if (c.scan.band_low < 0.0 || c.scan.band_low > c.threshold) throw Error("scan.band_low must be in [0, threshold]");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad config: ") + e.what());
    }
}

struct EnvOverride {
    const char* var;
    const char* pointer;
};

inline const std::vector<EnvOverride>& env_overrides() {
    static const std::vector<EnvOverride> kTable = {
        {"PHISHSCOPE_THRESHOLD", "/threshold"},
        {"PHISHSCOPE_BAND_LOW", "/scan/band_low"},
        {"PHISHSCOPE_MAX_CHILDREN", "/scan/max_children"},
        {"PHISHSCOPE_FORM_FOLLOWTHROUGH", "/scan/form_followthrough"},
        {"PHISHSCOPE_MODEL", "/model"},
        {"PHISHSCOPE_EXTERNAL_SCORER", "/external_scorer/command"},
        {"PHISHSCOPE_STORE", "/store"},
        {"PHISHSCOPE_ALLOWLIST", "/allowlist"},
        {"PHISHSCOPE_RATE_LIMIT", "/rate_limit"},
        {"PHISHSCOPE_WORKERS", "/workers"},
        {"PHISHSCOPE_LISTEN_HOST", "/listen/host"},
        {"PHISHSCOPE_LISTEN_PORT", "/listen/port"},
        {"PHISHSCOPE_GENERATOR_ENDPOINT", "/generator/endpoint"},
        {"PHISHSCOPE_GENERATOR_MODEL", "/generator/model"},
        {"PHISHSCOPE_GENERATOR_API_KEY", "/generator/api_key"},
        {"PHISHSCOPE_FEED", "/feed/endpoint"},
    };
    return kTable;
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::optional<std::string>(v) : std::nullopt;
}

// Env values are converted to the type of the default they replace.
// PHISHSCOPE_PATCHES=on|off toggles every parser patch at once.
inline void apply_env(nlohmann::json& j, const EnvLookup& env) {
    for (const auto& o : env_overrides()) {
        auto v = env(o.var);
        if (!v) continue;
        nlohmann::json::json_pointer ptr(o.pointer);
        auto& slot = j.at(ptr);
        try {
            if (slot.is_boolean()) slot = config_detail::parse_bool(*v);
            else if (slot.is_number_integer() || slot.is_number_unsigned()) slot = std::stoll(*v);
            else if (slot.is_number()) slot = std::stod(*v);
            else if (slot.is_array()) {
                auto parsed = nlohmann::json::parse(*v, nullptr, false);
                if (parsed.is_array()) slot = parsed;
                else {
                    std::istringstream is(*v);
                    std::vector<std::string> words;
                    for (std::string w; is >> w;) words.push_back(w);
                    slot = words;
                }
            } else slot = *v;
        } catch (const std::invalid_argument&) {
            throw Error(std::string("bad value for ") + o.var + ": " + *v);
        } catch (const std::out_of_range&) {
            throw Error(std::string("bad value for ") + o.var + ": " + *v);
        }
    }
    if (auto v = env("PHISHSCOPE_PATCHES")) {
        bool on = config_detail::parse_bool(*v);
        for (const char* k : {"p1", "p2", "p3", "p4_1", "p6"}) j["patches"][k] = on;
    }
}

// Config file path precedence: explicit flag, then PHISHSCOPE_CONFIG, then
// ./phishscope.json when present, then defaults only.
inline std::optional<std::filesystem::path> config_path(const std::string& flag, const EnvLookup& env = process_env) {
    if (!flag.empty()) return flag;
    if (auto v = env("PHISHSCOPE_CONFIG"); v && !v->empty()) return *v;
    if (std::filesystem::exists("phishscope.json")) return std::filesystem::path("phishscope.json");
    return std::nullopt;
}

inline ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env) {
    auto defaults = config_to_json(ServiceConfig{});
    auto j = defaults;
    if (file) {
        std::ifstream is(*file);
        if (!is) throw Error("cannot read config " + file->string());
        auto given = nlohmann::json::parse(is, nullptr, false, true);
        if (given.is_discarded() || !given.is_object()) throw Error("config is not a JSON object: " + file->string());
        config_detail::check_keys(defaults, given, "");
        j.merge_patch(given);
    }
    apply_env(j, env);
    return config_from_json(j);
}

// Scorer from config: an external command wins over a model file.
inline std::shared_ptr<const ChunkScorer> make_scorer(const ServiceConfig& c) {
    if (!c.external_scorer.command.empty()) return std::make_shared<ExternalScorer>(c.external_scorer);
    if (c.model.empty()) throw Error("no model configured (set model, --model or PHISHSCOPE_MODEL)");
    return std::make_shared<ReferenceScorer>(ReferenceScorer::load_file(c.model));
}

inline Pipeline make_pipeline(const ServiceConfig& c, std::shared_ptr<const ChunkScorer> scorer) {
    return Pipeline{std::move(scorer), c.patches, c.window, c.threshold};
}

inline std::shared_ptr<const WarningGenerator> make_generator(const ServiceConfig& c) {
    if (c.generator.endpoint.empty()) return nullptr;
    return std::make_shared<HttpWarningGenerator>(c.generator);
}

}  // namespace phishscope
