// phishscope command line. Results go to stdout, deterministic for a fixed
// seed; logs and anything time-dependent go to stderr.
//
// Exit codes: 0 ok, 1 operational error, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "phishscope/config.hpp"
#include "phishscope/feed.hpp"
#include "phishscope/optimizer.hpp"
#include "phishscope/profiler.hpp"
#include "phishscope/server.hpp"
#include "phishscope/service.hpp"

using namespace phishscope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : Error {
    using Error::Error;
};

struct Globals {
    uint64_t seed = 0;
    std::string config;
    std::string patches;
    std::string format = "text";
    size_t jobs = 0;
    std::string model;
    bool verbose = false;
    bool seed_given = false;

    bool structured() const { return format == "structured"; }
};

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path);
    return {std::istreambuf_iterator<char>(is), {}};
}

ServiceConfig load(const Globals& g) {
    auto cfg = load_config(config_path(g.config));
    if (g.patches == "off") cfg.patches = PatchConfig::all_off();
    else if (g.patches == "on") {
        auto probe = cfg.patches;
        cfg.patches = PatchConfig{};
        cfg.patches.action_probe_mode = probe.action_probe_mode;
    }
    if (!g.model.empty()) {
        cfg.model = g.model;
        cfg.external_scorer.command.clear();
    }
    if (g.jobs) cfg.workers = g.jobs;
    return cfg;
}

std::string page_url(const std::string& flag, const std::string& file) {
    return flag.empty() ? "file://" + fs::absolute(file).string() : flag;
}

json document_json(const ParsedDocument& doc) {
    json els = json::array();
    for (const auto& e : doc.elements) {
        json attrs = json::object();
        for (const auto& a : e.attributes) attrs[a.name] = a.value;
        els.push_back({{"index", e.order_index}, {"tag", to_string(e.kind)}, {"text", e.text}, {"attributes", attrs},
                       {"span", {e.source_span.begin, e.source_span.end}}});
    }
    json trace = json::object();
    for (const auto& t : doc.patch_trace) trace[t.patch_id] = t.count;
    return {{"url", doc.url}, {"elements", els}, {"patch_trace", trace}};
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

// Serves one local file for one url; anything else is unreachable.
class FileFetcher : public Fetcher {
public:
    FileFetcher(std::string url, std::string body) : url_(std::move(url)), body_(std::move(body)) {}
    FetchResult fetch(const FetchRequest& req) const override {
        if (req.url != url_ || req.method != "GET") throw FetchError("offline: " + req.url);
        FetchResult r;
        r.requested_url = r.final_url = url_;
        r.status = 200;
        r.body = body_;
        return r;
    }

private:
    std::string url_, body_;
};

std::string record_line(const ScanRecord& r) {
    std::ostringstream os;
    os << std::left << std::setw(13) << to_string(r.status) << " " << std::setw(8)
       << (r.status == ScanStatus::completed ? std::string(to_string(r.verdict.label)) : "-") << " " << std::fixed
       << std::setprecision(4) << r.verdict.confidence << " " << std::setw(15) << to_string(r.evasion.category) << " "
       << r.url;
    if (r.decided_by != "page") os << " (via " << r.decided_by << ")";
    return os.str();
}

void print_warning_text(const ExplainableWarning& w) {
    std::cout << "warning for " << w.url << "\n";
    if (w.target_brand_guess) std::cout << "  impersonating: " << *w.target_brand_guess << "\n";
    for (const auto& f : w.features)
        std::cout << "  - " << f.name << (f.novel ? " (new)" : "") << " at " << f.location << "\n    " << f.description
                  << "\n";
    std::cout << "  generator: " << w.generator << (w.fallback_reason.empty() ? "" : " (fallback: " + w.fallback_reason + ")")
              << "\n";
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
    auto log = spdlog::stderr_color_mt("phishscope");
    spdlog::set_default_logger(log);
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"phishscope: phishing page detection, adversarial testing and explainable warnings"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "seed for every randomised step")->default_val(0);
    app.add_option("--config", g.config, "config file (else PHISHSCOPE_CONFIG, else ./phishscope.json)");
    app.add_option("--patches", g.patches, "turn all parser patches on or off")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"text", "structured"}));
    app.add_option("--jobs", g.jobs, "cap on worker threads")->check(CLI::PositiveNumber);
    app.add_option("--model", g.model, "reference model file (overrides config)");
    app.add_flag("-v,--verbose", g.verbose, "log to stderr");

    std::string in, url, out, corpus;
    size_t W = 0, S = 0, budget = 35, k = 3;
    int epochs = 0, folds = 0;
    double l2 = -1, lr = -1;

    auto* parse = app.add_subcommand("parse", "print the parsed-text form of a page");
    parse->add_option("page", in, "html file")->required();
    parse->add_option("--url", url, "page url");

    auto* chunk = app.add_subcommand("chunk", "print the token windows of a page");
    chunk->add_option("page", in, "html file")->required();
    chunk->add_option("--url", url, "page url");
    chunk->add_option("-W", W, "window size");
    chunk->add_option("-S", S, "stride");

    auto* train = app.add_subcommand("train", "train the reference scorer on a labelled corpus");
    train->add_option("corpus", corpus, "directory with phishing/ and benign/")->required();
    train->add_option("-o,--out", out, "model file to write")->required();
    train->add_option("--epochs", epochs);
    train->add_option("--folds", folds);
    train->add_option("--l2", l2);
    train->add_option("--learning-rate", lr);

    auto* eval = app.add_subcommand("eval", "score a labelled corpus end to end");
    eval->add_option("corpus", corpus, "directory with phishing/ and benign/")->required();

    auto* scan = app.add_subcommand("scan", "scan one url with follow-up policies");
    scan->add_option("url", url, "http(s) url")->required();
    std::string html_file;
    bool no_store = false;
    scan->add_option("--html", html_file, "use this file as the page instead of fetching");
    scan->add_flag("--no-store", no_store, "do not write the record to the store");

    auto* serve = app.add_subcommand("serve", "run the scan API, optionally consuming the live feed");
    bool with_feed = false;
    serve->add_flag("--feed", with_feed, "also consume the certificate feed");

    auto* replay = app.add_subcommand("replay", "scan every url of a replay file");
    replay->add_option("file", in, "one url per line, optional timestamp")->required();

    auto* attack = app.add_subcommand("attack", "run the query-budgeted attack against a page");
    attack->add_option("page", in, "html file")->required();
    attack->add_option("--url", url, "page url");
    attack->add_option("--budget", budget, "query budget")->check(CLI::PositiveNumber);
    attack->add_option("-o,--out", out, "trace file (default <page>.attack.json)");

    auto* explain_cmd = app.add_subcommand("explain", "explain the verdict on a page");
    explain_cmd->add_option("page", in, "html file")->required();
    explain_cmd->add_option("--url", url, "page url");
    explain_cmd->add_option("-k", k, "top elements")->check(CLI::PositiveNumber);

    auto* profile_cmd = app.add_subcommand("profile", "classify the evasion technique of a page");
    profile_cmd->add_option("page", in, "html file")->required();

    auto* block = app.add_subcommand("blocklist", "query the blocklist store");
    block->require_subcommand(1);
    auto* block_get = block->add_subcommand("get", "latest record for a url");
    block_get->add_option("url", url)->required();
    auto* block_list = block->add_subcommand("list", "filtered, paginated records");
    std::string f_category, f_label, f_status, f_since, f_until;
    size_t page = 1, page_size = 100;
    block_list->add_option("--category", f_category);
    block_list->add_option("--label", f_label);
    block_list->add_option("--status", f_status);
    block_list->add_option("--since", f_since, "inclusive, ISO time or epoch seconds");
    block_list->add_option("--until", f_until, "exclusive");
    block_list->add_option("--page", page)->check(CLI::PositiveNumber);
    block_list->add_option("--page-size", page_size)->check(CLI::Range(1, 1000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;
    if (g.verbose) spdlog::set_level(spdlog::level::info);

    try {
        if (*parse) {
            PatchConfig patches = load(g).patches;
            auto doc = parse_html(read_file(in), page_url(url, in), patches);
            if (g.structured()) print(document_json(doc));
            else std::cout << render_parsed_text(doc);
            return 0;
        }
        if (*chunk) {
            auto cfg = load(g);
            if (W) cfg.window.W = W;
            if (S) cfg.window.S = S;
            cfg.window.validate();
            auto doc = parse_html(read_file(in), page_url(url, in), cfg.patches);
            auto chunks = make_windows(tokenize(doc), cfg.window);
            if (g.structured()) std::cout << chunk_dump(chunks, in);
            else
                for (size_t i = 0; i < chunks.size(); ++i)
                    std::cout << "#" << i << " tokens [" << chunks[i].token_span.first << ", " << chunks[i].token_span.second
                              << ") elements " << chunks[i].element_range.first << "-" << chunks[i].element_range.second
                              << (chunks[i].hard_split ? " (hard split)" : "") << "\n  " << chunks[i].text() << "\n";
            return 0;
        }
        if (*train) {
            auto cfg = load(g);
            TrainConfig tc;
            if (g.seed_given) tc.seed = g.seed;
            if (epochs) tc.epochs = epochs;
            if (folds) tc.folds = folds;
            if (l2 >= 0) tc.l2 = l2;
            if (lr > 0) tc.learning_rate = lr;
            auto docs = load_corpus(corpus);
            auto res = train_reference_scorer(training_examples(docs, cfg.patches, cfg.window), tc);
            res.model.save_file(out);
            spdlog::info("wrote {}", out);
            json folds_j = json::array();
            for (const auto& f : res.folds)
                folds_j.push_back({{"fold", f.fold}, {"train", f.train_examples}, {"test", f.test_examples},
                                   {"accuracy", f.confusion.accuracy()}, {"f1", f.confusion.f1()}});
            if (g.structured()) print({{"model", out}, {"documents", docs.size()}, {"folds", folds_j}});
            else {
                std::cout << "trained on " << docs.size() << " documents -> " << out << "\n";
                for (const auto& f : folds_j)
                    std::cout << "fold " << f["fold"] << ": accuracy " << std::fixed << std::setprecision(4)
                              << f["accuracy"].get<double>() << "  f1 " << f["f1"].get<double>() << "\n";
            }
            return 0;
        }
        if (*eval) {
            auto cfg = load(g);
            auto pipeline = make_pipeline(cfg, make_scorer(cfg));
            auto m = evaluate(pipeline, load_corpus(corpus));
            std::cerr << "median latency " << m.median_latency_ms << " ms\n";
            if (g.structured()) print(m.to_json());
            else {
                std::cout << std::fixed << std::setprecision(4) << "accuracy   " << m.accuracy() << "\nprecision  "
                          << m.precision() << "\nrecall     " << m.recall() << "\nf1         " << m.f1() << "\n"
                          << "tp " << m.confusion.tp << "  fp " << m.confusion.fp << "  tn " << m.confusion.tn << "  fn "
                          << m.confusion.fn << "  inconclusive " << m.inconclusive << "\n";
            }
            return 0;
        }
        if (*attack) {
            auto cfg = load(g);
            auto pipeline = make_pipeline(cfg, make_scorer(cfg));
            OptimizerConfig oc;
            oc.Q = budget;
            oc.threshold = cfg.threshold;
            oc.params.seed = g.seed;
            auto u = page_url(url, in);
            auto run = optimize(read_file(in), u, pipeline_evaluator(pipeline, u), oc, in);
            if (out.empty()) out = in + ".attack.json";
            std::ofstream(out) << attack_run_to_json(run).dump(2) << "\n";
            if (g.structured()) print(attack_run_to_json(run));
            else
                std::cout << std::fixed << std::setprecision(4) << "C_o " << run.c_o << " -> " << run.best_score
                          << "  advantage " << run.advantage() << "  queries " << run.queries << "/" << run.budget
                          << "\ntrace: " << out << "\n";
            return 0;
        }
        if (*explain_cmd) {
            auto cfg = load(g);
            auto pipeline = make_pipeline(cfg, make_scorer(cfg));
            auto u = page_url(url, in);
            auto doc = pipeline.parse(read_file(in), u);
            auto ec = cfg.scan.explain;
            ec.seed = g.seed;
            auto gen = make_generator(cfg);
            auto w = explain(doc, u, pipeline, ec, gen.get(), k);
            if (g.structured()) print(w.to_json());
            else print_warning_text(w);
            return 0;
        }
        if (*profile_cmd) {
            auto p = profile(read_file(in));
            if (g.structured()) print(p.to_json());
            else {
                std::cout << to_string(p.category) << "\n";
                for (const auto& s : p.signals)
                    std::cout << "  " << s.id << " [" << to_string(s.category) << "] bytes " << s.begin << "-" << s.end
                              << (s.detail.empty() ? "" : ": " + s.detail) << "\n";
            }
            return 0;
        }
        if (*block) {
            auto cfg = load(g);
            BlocklistStore store(cfg.store);
            if (*block_get) {
                auto r = store.get(url);
                if (!r)
                    if (auto c = canonical_candidate(url)) r = store.get(*c);
                if (!r) throw Error("no record for " + url);
                if (g.structured()) print(r->to_json());
                else std::cout << record_line(*r) << "\n";
                return 0;
            }
            RecordFilter f;
            auto need = [](auto v, const std::string& what) {
                if (!v) throw UsageError("bad " + what);
                return *v;
            };
            if (!f_category.empty()) f.category = need(evasion_category_from_string(f_category), "--category " + f_category);
            if (!f_label.empty()) f.label = need(label_from_string(f_label), "--label " + f_label);
            if (!f_status.empty()) f.status = need(scan_status_from_string(f_status), "--status " + f_status);
            if (!f_since.empty()) f.since = need(parse_time(f_since), "--since " + f_since);
            if (!f_until.empty()) f.until = need(parse_time(f_until), "--until " + f_until);
            auto p = store.list(f, page, page_size);
            if (g.structured()) print(p.to_json());
            else {
                for (const auto& r : p.records) std::cout << record_line(r) << "\n";
                std::cout << "page " << p.page << "/" << p.pages() << ", " << p.total << " records\n";
            }
            return 0;
        }

        // Scanning commands.
        auto cfg = load(g);
        auto pipeline = make_pipeline(cfg, make_scorer(cfg));
        std::shared_ptr<const Fetcher> fetcher = std::make_shared<HttpFetcher>(cfg.fetch);

        if (*scan) {
            auto canon = canonical_candidate(url);
            if (!canon) throw UsageError("not an http(s) url: " + url);
            if (!html_file.empty()) fetcher = std::make_shared<FileFetcher>(*canon, read_file(html_file));
            Scanner scanner(pipeline, fetcher, cfg.scan, make_generator(cfg), system_now, cfg.sinks);
            auto r = scanner.scan_url(*canon);
            if (!no_store) BlocklistStore(cfg.store).put(r);
            std::cerr << "scanned at " << format_time(r.scanned_at) << "\n";
            if (g.structured()) print(timeless(r));
            else {
                std::cout << record_line(r) << "\n";
                if (!r.error.empty()) std::cout << "  error: " << r.error << "\n";
                if (r.warning) print_warning_text(*r.warning);
            }
            return r.status == ScanStatus::fetch_failed || r.status == ScanStatus::inconclusive ? 1 : 0;
        }

        Allowlist allow = cfg.allowlist.empty() ? Allowlist{} : Allowlist::load(cfg.allowlist);
        Ingestor ingest(std::move(allow), cfg.dedup_window, [](std::string_view what, std::string_view u) {
            spdlog::info("{}: {}", what, u);
        });
        Scanner scanner(pipeline, fetcher, cfg.scan, make_generator(cfg), system_now, cfg.sinks);
        BlocklistStore store(cfg.store);
        ScanService service(scanner, store, cfg.workers, cfg.queue_capacity, cfg.rate_limit);

        if (*replay) {
            std::vector<ScanRecord> records;
            std::mutex mu;
            auto stats = service.run_replay(in, ingest, system_now, [&](const ScanRecord& r) {
                std::lock_guard lock(mu);
                records.push_back(r);
            });
            // completion order depends on scheduling; print in url order
            std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.url < b.url; });
            if (g.structured()) {
                json rs = json::array();
                for (const auto& r : records) rs.push_back(timeless(r));
                print({{"stats", stats.to_json()}, {"records", rs}});
            } else {
                for (const auto& r : records) std::cout << record_line(r) << "\n";
                std::cout << stats.to_json().dump() << "\n";
            }
            return 0;
        }

        if (*serve) {
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            ApiServer api(scanner, store);
            int port = api.bind(cfg.listen_host, cfg.listen_port);
            if (port < 0) throw Error("cannot bind " + cfg.listen_host + ":" + std::to_string(cfg.listen_port));
            std::thread http([&] { api.listen_after_bind(); });
            api.wait_until_ready();
            spdlog::set_level(spdlog::level::info);
            spdlog::info("listening on http://{}:{}", cfg.listen_host, port);
            std::thread feed_thread;
            std::exception_ptr feed_error;
            if (with_feed)
                feed_thread = std::thread([&] {
                    try {
                        FeedClient feed(cfg.feed);
                        service.run([&](const auto& push) {
                            ingest_feed(feed, ingest, system_now, [&](const Candidate& c) { push(c); }, g_stop);
                        }, [](const ScanRecord& r) { spdlog::info("{}", record_line(r)); });
                    } catch (...) {
                        feed_error = std::current_exception();
                        g_stop = true;
                    }
                });
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            api.stop();
            http.join();
            if (feed_thread.joinable()) feed_thread.join();
            if (feed_error) std::rethrow_exception(feed_error);
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
