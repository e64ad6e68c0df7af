#include "kontext/sequence.hpp"

#include <algorithm>

namespace kontext {

std::vector<int> EncodedContext::outputs_for(std::span<OutcomeId const> outcome) const
{
  std::vector<int> out(label_length, kMaskedOutput);
  out.insert(out.end(), outcome.begin(), outcome.end());
  return out;
}

SequenceEncoding encode_sequences(EmpiricalModel const &model)
{
  std::vector<std::vector<int>> labels(model.num_contexts());
  int                           label_tokens = 0;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    auto const &ctx = model.context(c);
    labels[c]       = ctx.label;
    if (labels[c].empty() && ctx.inputs.empty())
    {
      labels[c] = {static_cast<int>(c)};
    }
    for (int t : labels[c])
    {
      label_tokens = std::max(label_tokens, t + 1);
    }
  }

  SequenceEncoding enc;
  enc.num_outcomes = model.num_outcomes();
  int query_tokens = 0;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    auto const    &ctx = model.context(c);
    EncodedContext e;
    e.inputs       = labels[c];
    e.label_length = labels[c].size();
    for (std::size_t j = 0; j < ctx.observables.size(); ++j)
    {
      int const q = ctx.inputs.empty() ? ctx.observables[j] : ctx.inputs[j];
      query_tokens = std::max(query_tokens, q + 1);
      e.inputs.push_back(label_tokens + q);
    }
    enc.contexts.push_back(std::move(e));
  }
  enc.input_alphabet = label_tokens + query_tokens;
  return enc;
}

}  // namespace kontext
