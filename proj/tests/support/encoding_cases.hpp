#pragma once

// Encoding-normalization fixtures. Expected outputs were produced with
// Python's base64 / codecs modules, independent of the C++ decoder.

#include <string>
#include <vector>

namespace phishscope::testing {

struct EncodingCase {
    const char* name;
    std::string input;
    std::string expected;
};

inline std::vector<EncodingCase> encoding_cases() {
    using namespace std::string_literals;
    return {
        {"base64 eval wrapper", std::string("<script>eval(atob(\"YWxlcnQoMSk=\"))</script>", 43), std::string("<script>alert(1)</script>", 25)},
        {"pure ascii identity", std::string("<html><body><h1>Hello</h1><p>plain text</p></body></html>", 57), std::string("<html><body><h1>Hello</h1><p>plain text</p></body></html>", 57)},
        {"latin-1 meta charset", std::string("<meta charset=\"iso-8859-1\"><p>caf\xE9""</p>", 38), std::string("<meta charset=\"utf-8\"><p>caf\xC3""\xA9""</p>", 34)},
        {"windows-1252 smart quotes", std::string("<meta charset=\"windows-1252\"><p>\x93""quoted\x94"" \x80""</p>", 46), std::string("<meta charset=\"utf-8\"><p>\xE2""\x80""\x9C""quoted\xE2""\x80""\x9D"" \xE2""\x82""\xAC""</p>", 45)},
        {"invalid utf-8 replaced", std::string("<p>a\xFF""b\xC3""</p>", 11), std::string("<p>a\xEF""\xBF""\xBD""b\xEF""\xBF""\xBD""</p>", 15)},
        {"nested base64 wrappers", std::string("<script>eval(atob(\"ZXZhbChhdG9iKCJZV3hsY25Rb01Taz0iKSk=\"))</script>", 67), std::string("<script>alert(1)</script>", 25)},
        {"function constructor wrapper", std::string("<script>new Function(atob(\"ZG9jdW1lbnQubG9jYXRpb249Imh0dHBzOi8veC50ZXN0LyI=\"))();</script>", 90), std::string("<script>document.location=\"https://x.test/\"</script>", 52)},
        {"window-qualified single quotes", std::string("<script>window.eval(window.atob('cHJvbXB0KCJwaW4iKQ=='))</script>", 65), std::string("<script>prompt(\"pin\")</script>", 30)},
        {"utf-8 decode idiom", std::string("<script>eval(decodeURIComponent(escape(atob(\"YWxlcnQoImjDqWxsbyIp\"))))</script>", 79), std::string("<script>alert(\"h\xC3""\xA9""llo\")</script>", 32)},
        {"unescape percent wrapper", std::string("<script>eval(unescape(\"%61%6c%65%72%74%28%32%29\"))</script>", 59), std::string("<script>alert(2)</script>", 25)},
        {"fromCharCode wrapper", std::string("<script>eval(String.fromCharCode(97,108,101,114,116,40,51,41))</script>", 71), std::string("<script>alert(3)</script>", 25)},
        {"undecodable base64 left verbatim", std::string("<script>eval(atob(\"@@@@\"))</script>", 35), std::string("<script>eval(atob(\"@@@@\"))</script>", 35)},
        {"binary payload left verbatim", std::string("<script>eval(atob(\"//4AAQ==\"))</script>", 39), std::string("<script>eval(atob(\"//4AAQ==\"))</script>", 39)},
        {"utf-8 bom stripped", std::string("\xEF""\xBB""\xBF""<p>x</p>", 11), std::string("<p>x</p>", 8)},
        {"utf-16le with bom", std::string("\xFF""\xFE""<\x00""p\x00"">\x00""\xE9""\x00""<\x00""/\x00""p\x00"">\x00""", 18), std::string("<p>\xC3""\xA9""</p>", 9)},
        {"declared utf-8 with latin-1 byte", std::string("<meta charset=\"utf-8\"><p>caf\xE9""</p>", 33), std::string("<meta charset=\"utf-8\"><p>caf\xEF""\xBF""\xBD""</p>", 35)},
        {"http-equiv content-type charset", std::string("<meta http-equiv=\"Content-Type\" content=\"text/html; charset=ISO-8859-1\"><p>\xFC""ber</p>", 83), std::string("<meta http-equiv=\"Content-Type\" content=\"text/html; charset=utf-8\"><p>\xC3""\xBC""ber</p>", 79)},
        {"plain eval literal untouched", std::string("<script>eval(\"alert(1)\")</script>", 33), std::string("<script>eval(\"alert(1)\")</script>", 33)},
        {"wrapper with trailing code untouched", std::string("<script>eval(atob(\"YWxlcnQoMSk=\")); track();</script>", 53), std::string("<script>eval(atob(\"YWxlcnQoMSk=\")); track();</script>", 53)},
        {"two scripts and a commented decoy", std::string("<!-- <script>eval(atob(\"YWxlcnQoMSk=\"))</script> --><script>eval(atob(\"YSgp\"))</script><p>x</p><script> eval(atob(\"Yigp\")); </script>", 133), std::string("<!-- <script>eval(atob(\"YWxlcnQoMSk=\"))</script> --><script>a()</script><p>x</p><script>b()</script>", 100)},
    };
}

}  // namespace phishscope::testing
