#pragma once

#include <cstdint>

#include "kontext/model.hpp"
#include "kontext/sections.hpp"

namespace kontext {

struct PartitionBudget
{
  /// Nodes of the set-partition search tree.
  std::uint64_t max_nodes = 10'000'000;
  SectionBudget sections  = {};
};

/// Sum over set partitions of the contexts into at most k nonempty parts
/// of the product of the parts' section counts. Each count is taken over
/// the union of the part's observables. Throws SizeLimit past the budget
/// or when the value does not fit 64 bits.
std::uint64_t n_e_k(EmpiricalModel const &model, int k, PartitionBudget const &budget = {});

/// True iff the contexts split into at most `max_parts` jointly compatible
/// parts, i.e. n_e_k(model, max_parts) > 0.
bool has_compatible_partition(EmpiricalModel const &model, int max_parts, PartitionBudget const &budget = {});

/// Largest k for which the model is strongly k-contextual (0 when the model
/// is not strongly contextual at all).
int contextuality_number_definitional(EmpiricalModel const &model, PartitionBudget const &budget = {});

}  // namespace kontext
