#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "support/desk_corpus.hpp"

namespace fs = std::filesystem;
using namespace phishscope;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// stdout only; stderr is discarded so runs can be compared byte for byte
Run cli(const std::string& args) {
    std::string cmd = std::string(PHISHSCOPE_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    int st = ::pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("phishscope-cli-" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        size_t i = 0;
        for (const auto& d : phishscope::testing::desk_corpus(60, 40, 0, 3)) {
            auto sub = dir_ / "corpus" / std::string(to_string(d.label));
            fs::create_directories(sub);
            auto name = "doc" + std::to_string(i++);
            std::ofstream(sub / (name + ".html")) << d.html;
            std::ofstream(sub / (name + ".url")) << d.url << "\n";
            if (d.label == Label::phishing && phish_.empty()) phish_ = (sub / (name + ".html")).string();
        }
        std::ofstream(dir_ / "phishscope.json") << nlohmann::json{{"store", (dir_ / "store.jsonl").string()}}.dump();
        auto r = cli("train " + (dir_ / "corpus").string() + " -o " + model() + " --folds 2 --epochs 4");
        ASSERT_EQ(r.code, 0) << r.out;
    }
    static std::string model() { return (dir_ / "m.model").string(); }
    static std::string g() { return "--config " + (dir_ / "phishscope.json").string() + " --model " + model() + " "; }

    static inline fs::path dir_;
    static inline std::string phish_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("parse").code, 2);
    EXPECT_EQ(cli("--patches maybe parse x.html").code, 2);
    EXPECT_EQ(cli("--format xml parse x.html").code, 2);
    EXPECT_EQ(cli(g() + "blocklist list --category Nope").code, 2);
    EXPECT_EQ(cli(g() + "scan ftp://x.example/").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, OperationalErrorsExitOne) {
    EXPECT_EQ(cli("parse /nonexistent/page.html").code, 1);
    EXPECT_EQ(cli("--model /nonexistent.model eval " + (dir_ / "corpus").string()).code, 1);
    EXPECT_EQ(cli(g() + "blocklist get https://never-scanned.example/").code, 1);
}

TEST_F(Cli, ParseMatchesLibraryAndStructuredIsJson) {
    auto html = [&] {
        std::ifstream is(phish_);
        return std::string(std::istreambuf_iterator<char>(is), {});
    }();
    auto r = cli("parse " + phish_ + " --url https://x.example/");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, render_parsed_text(parse_html(html, "https://x.example/")));
    auto off = cli("--patches off parse " + phish_ + " --url https://x.example/");
    EXPECT_EQ(off.out, render_parsed_text(parse_html(html, "https://x.example/", PatchConfig::all_off())));
    auto s = cli("--format structured parse " + phish_ + " --url https://x.example/");
    auto j = nlohmann::json::parse(s.out);
    EXPECT_EQ(j["elements"].size(), parse_html(html, "https://x.example/").elements.size());
    auto c = cli("--format structured chunk " + phish_ + " -W 64 -S 32");
    ASSERT_EQ(c.code, 0);
    std::istringstream lines(c.out);
    std::string line;
    size_t n = 0;
    while (std::getline(lines, line)) {
        auto rec = nlohmann::json::parse(line);
        EXPECT_LE(rec["tokens"].size(), 64u);
        ++n;
    }
    EXPECT_GT(n, 0u);
    EXPECT_EQ(cli("chunk " + phish_ + " -W 16 -S 32").code, 1);  // S > W
}

TEST_F(Cli, EvalMatchesLibrary) {
    auto r = cli(g() + "--format structured eval " + (dir_ / "corpus").string());
    ASSERT_EQ(r.code, 0);
    auto j = nlohmann::json::parse(r.out);
    Pipeline p{std::make_shared<ReferenceScorer>(ReferenceScorer::load_file(model())), PatchConfig{}, WindowConfig{}, 0.5};
    auto m = evaluate(p, load_corpus(dir_ / "corpus"));
    EXPECT_EQ(j["tp"], m.confusion.tp);
    EXPECT_EQ(j["fp"], m.confusion.fp);
    EXPECT_EQ(j["tn"], m.confusion.tn);
    EXPECT_EQ(j["fn"], m.confusion.fn);
    EXPECT_EQ(cli(g() + "eval " + (dir_ / "corpus").string()).code, 0);
}

// Same seed, same inputs: identical stdout.
TEST_F(Cli, SeededRunsAreByteReproducible) {
    for (const std::string cmd : {"--seed 7 --format structured explain " + phish_, "--seed 7 explain " + phish_,
                                  "--format structured profile " + phish_}) {
        auto a = cli(g() + cmd), b = cli(g() + cmd);
        ASSERT_EQ(a.code, 0) << cmd;
        EXPECT_EQ(a.out, b.out) << cmd;
        EXPECT_FALSE(a.out.empty());
    }
    auto trace1 = (dir_ / "t1.json").string(), trace2 = (dir_ / "t2.json").string();
    auto a = cli(g() + "--seed 3 --format structured attack " + phish_ + " --budget 35 -o " + trace1);
    auto b = cli(g() + "--seed 3 --format structured attack " + phish_ + " --budget 35 -o " + trace2);
    if (a.code == 0) {
        EXPECT_EQ(a.out, b.out);
        auto j = nlohmann::json::parse(a.out);
        EXPECT_LE(j["queries"].get<size_t>(), 35u);
        std::ifstream t(trace1);
        EXPECT_EQ(nlohmann::json::parse(t), j);
    } else {
        EXPECT_EQ(a.code, 1);  // model does not flag the page: NotPhishing
    }
}

TEST_F(Cli, OfflineScanThenBlocklistQuery) {
    auto r = cli(g() + "--format structured scan https://offline.example/login --html " + phish_);
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["url"], "https://offline.example/login");
    EXPECT_FALSE(j.contains("scanned_at"));
    EXPECT_EQ(j["status"], "completed");
    EXPECT_EQ(r.code, 0);
    auto got = cli(g() + "--format structured blocklist get https://offline.example/login");
    ASSERT_EQ(got.code, 0);
    EXPECT_EQ(nlohmann::json::parse(got.out)["verdict"], j["verdict"]);
    auto list = nlohmann::json::parse(cli(g() + "--format structured blocklist list --page-size 10").out);
    EXPECT_GE(list["total"].get<size_t>(), 1u);
}
