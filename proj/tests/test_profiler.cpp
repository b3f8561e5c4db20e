#include <gtest/gtest.h>

#include "phishscope/manipulations.hpp"
#include "phishscope/profiler.hpp"
#include "support/desk_corpus.hpp"

using namespace phishscope;

namespace {

EvasionCategory category_of(std::string_view html) { return profile(html).category; }

bool fired(const EvasionProfile& p, std::string_view id) {
    for (const auto& s : p.signals)
        if (s.id == id) return true;
    return false;
}

const char* kMouseMove = R"(<html>
<head><title>Loading</title></head>
<body onmousemove="window.location.href='https://collect.example.net/login'">
<h1>Please wait</h1>
<p>Move your mouse to continue.</p>
<form action="https://collect.example.net/p">
<input type="password" name="p">
</form>
</body>
</html>)";

const char* kPlainForm = R"(<html><head><title>Sign in</title></head><body>
<form action="/login" method="post"><input type="email" name="e"><input type="password" name="p">
<button type="submit">Sign in</button></form></body></html>)";

const char* kClickjack = R"(<html><body>
<button id="win">Claim your prize</button>
<iframe src="https://bank.example/transfer" style="opacity:0; position:absolute; top:0; left:0; z-index:10"></iframe>
</body></html>)";

}  // namespace

TEST(Profiler, MouseMoveRedirectIsBehavioral) {
    auto p = profile(kMouseMove);
    EXPECT_EQ(p.category, EvasionCategory::BehavioralJS);
    ASSERT_TRUE(fired(p, "behavioral.handler_navigation"));
    // the span covers the body start tag
    std::string_view html = kMouseMove;
    for (const auto& s : p.signals)
        if (s.id == "behavioral.handler_navigation")
            EXPECT_EQ(html.substr(s.begin, 16), "<body onmousemov");
}

TEST(Profiler, PlainFormIsRegular) {
    auto p = profile(kPlainForm);
    EXPECT_EQ(p.category, EvasionCategory::Regular);
    EXPECT_TRUE(p.signals.empty());
}

TEST(Profiler, TransparentIframeOverButtonIsClickjacking) {
    auto p = profile(kClickjack);
    EXPECT_EQ(p.category, EvasionCategory::Clickjacking);
    EXPECT_TRUE(fired(p, "clickjacking.transparent_iframe"));
    // visible iframe, or no z-index: nothing fires
    EXPECT_EQ(category_of(R"(<button>x</button><iframe src="a" style="opacity:1;z-index:10"></iframe>)"),
              EvasionCategory::Regular);
    EXPECT_EQ(category_of(R"(<button>x</button><iframe src="a" style="opacity:0"></iframe>)"), EvasionCategory::Regular);
}

TEST(Profiler, ClickjackingViaStylesheetAndVisibility) {
    EXPECT_EQ(category_of("<style>.ov{visibility:hidden;z-index:99;position:fixed}</style><a href=\"/x\">go</a>"
                          "<iframe class=\"ov\" src=\"https://t.example\"></iframe>"),
              EvasionCategory::Clickjacking);
    EXPECT_EQ(category_of("<a href=\"/x\">go</a><iframe src=\"https://t.example\" style=\"position:fixed;width:100%;"
                          "height:100vh;pointer-events:none\"></iframe>"),
              EvasionCategory::Clickjacking);
}

TEST(Profiler, TimerRedirectNeedsPositiveDelay) {
    EXPECT_EQ(category_of("<script>setTimeout(function() { window.location.href = \"https://x.example\"; }, 3000);</script>"),
              EvasionCategory::BehavioralJS);
    EXPECT_EQ(category_of("<script>setTimeout(go, 1500); function go() { location.replace(\"https://x.example\"); }</script>"),
              EvasionCategory::BehavioralJS);
    EXPECT_EQ(category_of("<script>setTimeout(function() { location.href = \"/x\"; }, 0);</script>"),
              EvasionCategory::Regular);
    EXPECT_EQ(category_of("<script>setTimeout(function() { console.log(1); }, 500);</script>"), EvasionCategory::Regular);
}

TEST(Profiler, PopupHooks) {
    EXPECT_EQ(category_of("<body onbeforeunload=\"return 'stay'\"><p>x</p></body>"), EvasionCategory::BehavioralJS);
    EXPECT_EQ(category_of("<script>window.open(\"https://ad.example\"); window.location = \"https://x.example\";</script>"),
              EvasionCategory::BehavioralJS);
    EXPECT_EQ(category_of("<script>window.open(\"/help\");</script>"), EvasionCategory::Regular);
}

TEST(Profiler, ComparisonIsNotNavigation) {
    EXPECT_EQ(category_of("<button onclick=\"if (location.href == 'x') alert(1)\">b</button>"), EvasionCategory::Regular);
    EXPECT_EQ(category_of("<button onclick=\"location.href='https://x.example'\">b</button>"),
              EvasionCategory::BehavioralJS);
}

TEST(Profiler, DomManipulation) {
    EXPECT_EQ(category_of("<script>var f = document.createElement(\"form\"); document.body.appendChild(f);</script>"),
              EvasionCategory::DOMManipulation);
    EXPECT_EQ(category_of("<div id=\"x\"></div><script>document.getElementById(\"x\").innerHTML = "
                          "'<form action=\"/p\"><input type=\"password\"></form>';</script>"),
              EvasionCategory::DOMManipulation);
    EXPECT_EQ(category_of("<div id=\"box\" style=\"display:none\"><input type=\"password\" name=\"p\"></div>"
                          "<script>document.getElementById(\"box\").style.display = \"block\";</script>"),
              EvasionCategory::DOMManipulation);
    // toggling something unrelated to credentials is not a signal
    EXPECT_EQ(category_of("<div id=\"menu\"></div><script>document.getElementById(\"menu\").style.display = "
                          "\"block\";</script>"),
              EvasionCategory::Regular);
}

TEST(Profiler, NestedDecodeChains) {
    auto b64 = base64::encode("alert(1)");
    EXPECT_EQ(category_of("<script>eval(atob(\"" + b64 + "\"))</script>"), EvasionCategory::Regular);
    EXPECT_EQ(category_of("<script>eval(unescape(atob(\"" + b64 + "\")))</script>"), EvasionCategory::TextEncoding);
    // the ObfuscateJS wrapper applied twice nests two layers
    std::string page = "<html><body><script>alert(1)</script></body></html>";
    auto once = apply_manipulation(page, ManipulationId::A8).html;
    auto twice = apply_manipulation(once, ManipulationId::A8).html;
    EXPECT_EQ(category_of(once), EvasionCategory::Regular);
    EXPECT_EQ(category_of(twice), EvasionCategory::TextEncoding);
    EXPECT_EQ(category_of("<script>document.write(unescape(\"%3Cp%3Ehi%3C/p%3E\"));</script>"), EvasionCategory::Regular);
    EXPECT_EQ(category_of("<script>document.write(decodeURIComponent(escape(atob(\"" + b64 + "\"))));</script>"),
              EvasionCategory::TextEncoding);
}

TEST(Profiler, CharsetMismatch) {
    auto p = profile("<html><head><meta charset=\"utf-8\"></head><body><p>caf\xE9</p></body></html>");
    EXPECT_EQ(p.category, EvasionCategory::TextEncoding);
    ASSERT_EQ(p.signals.size(), 1u);
    EXPECT_EQ(p.signals[0].id, "encoding.charset_mismatch");
    std::string_view html = "<html><head><meta charset=\"utf-8\"></head>";
    EXPECT_EQ(html.substr(p.signals[0].begin, p.signals[0].end - p.signals[0].begin), "utf-8");

    EXPECT_EQ(category_of("<meta charset=\"iso-8859-1\"><p>caf\xC3\xA9</p>"), EvasionCategory::TextEncoding);
    EXPECT_EQ(category_of("<meta charset=\"iso-8859-1\"><p>caf\xE9</p>"), EvasionCategory::Regular);
    EXPECT_EQ(category_of("<meta charset=\"utf-8\"><p>caf\xC3\xA9</p>"), EvasionCategory::Regular);
}

TEST(Profiler, WhitespacePadding) {
    std::string js = "var a = 1;";
    for (int i = 0; i < 40; ++i) js += "          \n   var b" + std::to_string(i) + " = a;";
    EXPECT_EQ(category_of("<script>" + js + "</script>"), EvasionCategory::TextEncoding);
    std::string dense;
    for (int i = 0; i < 40; ++i) dense += "var b" + std::to_string(i) + "=a+1;";
    EXPECT_EQ(category_of("<script>" + dense + "</script>"), EvasionCategory::Regular);
}

TEST(Profiler, PrecedenceOrder) {
    std::string behavioral = "<button onclick=\"location.href='https://x.example'\">b</button>";
    std::string dom = "<script>document.createElement(\"input\");</script>";
    std::string encoded = "<script>eval(unescape(atob(\"" + base64::encode("x=1") + "\")))</script>";
    EXPECT_EQ(category_of(std::string(kClickjack) + dom), EvasionCategory::DOMManipulation);
    EXPECT_EQ(category_of(dom + behavioral), EvasionCategory::BehavioralJS);
    EXPECT_EQ(category_of(behavioral + encoded), EvasionCategory::TextEncoding);
    auto p = profile(behavioral + encoded + dom + kClickjack);
    EXPECT_EQ(p.category, EvasionCategory::TextEncoding);
    EXPECT_GE(p.signals.size(), 4u);
}

TEST(Profiler, SpansInsideDocumentAndDeterministic) {
    auto corpus = phishscope::testing::desk_corpus(40, 40, 30, 4);
    std::vector<std::string> extra = {kMouseMove, kClickjack, kPlainForm};
    for (const auto& d : corpus) extra.push_back(d.html);
    for (const auto& html : extra) {
        auto a = profile(html);
        auto b = profile(html);
        EXPECT_EQ(a.category, b.category);
        EXPECT_EQ(a.signals, b.signals);
        for (const auto& s : a.signals) {
            EXPECT_LE(s.begin, s.end);
            EXPECT_LE(s.end, html.size());
        }
    }
}

// Unrelated benign markup never changes the category.
TEST(Profiler, BenignMarkupIsNeutral) {
    auto corpus = phishscope::testing::desk_corpus(40, 20, 20, 6);
    std::vector<std::string> pages = {kMouseMove, kClickjack, kPlainForm};
    for (const auto& d : corpus) pages.push_back(d.html);
    const char* kAdditions[] = {"<p>Opening hours may vary.</p>", "<div class=\"n\"><a href=\"/about\">About</a></div>",
                                "<ul><li>One</li><li>Two</li></ul>", "<footer><p>Contact us</p></footer>"};
    for (const auto& html : pages) {
        auto before = profile(html).category;
        for (const char* add : kAdditions) {
            std::string page = html;
            size_t at = manip::body_insert_pos(page);
            page.insert(at, add);
            EXPECT_EQ(profile(page).category, before) << add;
        }
    }
}

TEST(Profiler, JsonRoundTrip) {
    auto p = profile(std::string(kMouseMove) + kClickjack);
    auto q = EvasionProfile::from_json(nlohmann::json::parse(p.to_json().dump()));
    EXPECT_EQ(q.category, p.category);
    EXPECT_EQ(q.signals, p.signals);
    EXPECT_EQ(evasion_category_from_string("clickjacking"), EvasionCategory::Clickjacking);
    EXPECT_FALSE(evasion_category_from_string("Other").has_value());
}
