#pragma once

#include <string>

#include "kontext/hmm.hpp"

namespace kontext {

/// JSON with states, inputs, outputs, initial_state, emission[x][l][o] and
/// transition[x][o][l][l'].
std::string hmm_to_json(Hmm const &h, int indent = -1);

/// Throws ParseError on malformed text and InvalidModel on rows that are
/// not distributions.
Hmm hmm_from_json(std::string const &text);

}  // namespace kontext
