// Stand-in for an external scorer process.
//   mock_scorer ok        handshake, then 0.9 for texts mentioning "password", else 0.1
//   mock_scorer slow      handshake, then never answers in time
//   mock_scorer badhello  wrong handshake
//   mock_scorer die       handshake, then exits on the first request
#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "ok";
    if (mode == "badhello") {
        std::cout << "{\"protocol\":\"something-else\",\"version\":7}" << std::endl;
        return 0;
    }
    std::cout << "{\"protocol\":\"phishscope-scorer\",\"version\":1}" << std::endl;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (mode == "die") return 3;
        auto req = nlohmann::json::parse(line);
        if (mode == "slow") std::this_thread::sleep_for(std::chrono::seconds(5));
        double c = req["text"].get<std::string>().find("password") != std::string::npos ? 0.9 : 0.1;
        std::cout << nlohmann::json{{"id", req["id"]}, {"confidence", c}}.dump() << std::endl;
    }
    return 0;
}
