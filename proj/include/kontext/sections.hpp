#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kontext/model.hpp"

namespace kontext {

struct SectionBudget
{
  /// DFS nodes visited while enumerating one section set.
  std::uint64_t max_nodes = 10'000'000;
  /// Sections held in one set.
  std::uint64_t max_sections = 10'000'000;
};

/// A global value assignment over an explicit domain of observables.
struct Section
{
  std::vector<ObservableId> domain;
  std::vector<OutcomeId>    values;

  OutcomeId at(ObservableId x) const;
};

/// All support-respecting assignments over `domain` (sorted ascending).
/// Assignments are stored row-major, one row of domain.size() values each,
/// in lexicographic order when produced by sections_of.
class SectionSet
{
public:
  SectionSet() = default;
  explicit SectionSet(std::vector<ObservableId> domain) : domain_(std::move(domain)) {}

  std::vector<ObservableId> const &domain() const noexcept { return domain_; }
  std::size_t                      size() const noexcept { return count_; }
  bool                             empty() const noexcept { return count_ == 0; }

  std::span<OutcomeId const> operator[](std::size_t i) const
  {
    return {values_.data() + i * domain_.size(), domain_.size()};
  }

  Section section(std::size_t i) const;

  void push_back(std::span<OutcomeId const> assignment);

private:
  std::vector<ObservableId> domain_;
  std::vector<OutcomeId>    values_;
  std::size_t               count_ = 0;
};

/// Every assignment over the union of the given contexts' observables whose
/// restriction to each context lies in that context's support. The set is
/// nonempty exactly when some distribution respects every support.
/// Throws SizeLimit when the search exceeds the budget.
SectionSet sections_of(EmpiricalModel const        &model,
                       std::span<std::size_t const> contexts,
                       SectionBudget const         &budget = {});

bool is_compatible(EmpiricalModel const        &model,
                   std::span<std::size_t const> contexts,
                   SectionBudget const         &budget = {});

/// Joint sections of (contexts behind `sections`) + `context`, computed by
/// filtering and extending an existing set instead of re-enumerating.
SectionSet extend_sections(EmpiricalModel const &model,
                           SectionSet const     &sections,
                           std::size_t           context,
                           SectionBudget const  &budget = {});

/// True iff the assignment, restricted to the context's observables, is in
/// the context's support. The domain must contain the context.
bool restricts_into(EmpiricalModel const        &model,
                    std::span<ObservableId const> domain,
                    std::span<OutcomeId const>    assignment,
                    std::size_t                   context);

}  // namespace kontext
