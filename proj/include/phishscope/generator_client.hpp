#pragma once

// Chat-completions style client for warning descriptions. Any failure
// (connect, timeout, non-200, unparseable reply) is GeneratorUnavailable so
// build_warning can fall back to the template.

#include <chrono>
#include <string>

#include "phishscope/explainer.hpp"
#include "phishscope/url.hpp"

#include <httplib.h>
#include <json.hpp>

namespace phishscope {

struct GeneratorConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8089/v1/chat/completions
    std::string model = "gpt-3.5-turbo";
    std::string api_key;
    std::chrono::milliseconds timeout{15000};
    double temperature = 0.0;
};

class HttpWarningGenerator : public WarningGenerator {
public:
    explicit HttpWarningGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {}

    std::string complete(const std::string& prompt) const override {
        auto u = Url::parse(cfg_.endpoint);
        if (!u || u->host.empty()) throw GeneratorUnavailable("bad generator endpoint " + cfg_.endpoint);
        std::string path = (u->path.empty() ? "/" : u->path) + (u->query.empty() ? "" : "?" + u->query);
        httplib::Client cli(u->origin());
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        nlohmann::json body = {{"model", cfg_.model},
                               {"temperature", cfg_.temperature},
                               {"messages", {{{"role", "user"}, {"content", prompt}}}}};
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) throw GeneratorUnavailable("generator request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) throw GeneratorUnavailable("generator returned HTTP " + std::to_string(res->status));
        try {
            auto j = nlohmann::json::parse(res->body);
            auto content = j.at("choices").at(0).at("message").at("content").get<std::string>();
            // tolerate a fenced block around the JSON
            auto b = content.find('{');
            auto e = content.rfind('}');
            if (b == std::string::npos || e == std::string::npos || e < b) throw GeneratorUnavailable("no JSON in reply");
            return content.substr(b, e - b + 1);
        } catch (const nlohmann::json::exception& ex) {
            throw GeneratorUnavailable(std::string("malformed generator reply: ") + ex.what());
        }
    }

private:
    GeneratorConfig cfg_;
};

}  // namespace phishscope
