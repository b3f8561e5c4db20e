#pragma once

#include <string>
#include <vector>

#include "phishscope/window.hpp"

namespace phishscope::testing {

// A token stream whose elements have the given lengths. Token text encodes
// its position so merges and slices can be checked by value.
inline TokenStream stream_of(const std::vector<size_t>& element_lengths) {
    TokenStream ts;
    size_t pos = 0;
    for (size_t e = 0; e < element_lengths.size(); ++e)
        for (size_t k = 0; k < element_lengths[e]; ++k) {
            ts.tokens.push_back("t" + std::to_string(pos++));
            ts.element_of.push_back(e);
        }
    return ts;
}

}  // namespace phishscope::testing
