#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kontext/model.hpp"

namespace kontext {

/// Marks a step whose output is summed out.
inline constexpr int kMaskedOutput = -1;

/// One context read as an input sequence: label tokens first (outputs
/// summed out), then one query per observable whose output is the outcome.
struct EncodedContext
{
  std::vector<int> inputs;
  std::size_t      label_length = 0;

  std::size_t length() const noexcept { return inputs.size(); }
  std::size_t query_length() const noexcept { return inputs.size() - label_length; }

  /// Full output sequence for an outcome tuple, masked on label steps.
  std::vector<int> outputs_for(std::span<OutcomeId const> outcome) const;
};

struct SequenceEncoding
{
  int                         input_alphabet = 0;
  int                         num_outcomes   = 0;
  std::vector<EncodedContext> contexts;
};

/// Label tokens keep their values. A query token is the context's input for
/// that position when present, else the observable id, shifted past the
/// label tokens. Contexts without label or inputs are labelled by their
/// index, so that every context is identifiable from its inputs.
SequenceEncoding encode_sequences(EmpiricalModel const &model);

}  // namespace kontext
