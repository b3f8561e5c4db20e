#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phishscope/scorer.hpp"

namespace phishscope::testing {

class FunctionScorer : public ChunkScorer {
public:
    using Fn = std::function<double(const std::vector<std::string>&)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    double score(const std::vector<std::string>& tokens) const override {
        ++calls;
        return fn_(tokens);
    }
    std::string name() const override { return "stub"; }
    mutable size_t calls = 0;

private:
    Fn fn_;
};

inline bool contains(const std::vector<std::string>& tokens, std::string_view t) {
    for (const auto& x : tokens)
        if (x == t) return true;
    return false;
}

}  // namespace phishscope::testing
