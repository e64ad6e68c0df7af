#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace kontext {

using ObservableId = int;
using OutcomeId    = int;
using Outcome      = std::vector<OutcomeId>;

/// Probabilities of a context distribution must sum to one within this.
inline constexpr double kDistributionTolerance = 1e-9;

/// A jointly measured subset of observables.
///
/// `label` and `inputs` only matter when the model is turned into a
/// sequence-learning task: `label` holds setting tokens read before any
/// outcome is produced, `inputs` holds one setting token per observable,
/// presented alongside the outcome at that position. Both may be empty.
struct Context
{
  int                       id = 0;
  std::vector<ObservableId> observables;
  std::vector<int>          label;
  std::vector<int>          inputs;
};

struct WeightedOutcome
{
  Outcome outcome;
  double  p = 0.0;
};

/// Conditional outcome distribution of one context. Only supported
/// outcomes (p > 0) are stored.
struct ContextDistribution
{
  std::vector<WeightedOutcome> entries;
};

struct ConsistencyViolation
{
  std::size_t               first  = 0;
  std::size_t               second = 0;
  std::vector<ObservableId> intersection;
  double                    discrepancy = 0.0;
};

/// Observables, an outcome alphabet, a cover of contexts and one
/// distribution per context. Immutable once constructed.
class EmpiricalModel
{
public:
  /// Validates structure and throws InvalidModel on any defect. With
  /// `enforce_consistency`, marginals on every context intersection must
  /// also agree; the model then reports consistency_enforced().
  EmpiricalModel(int                              num_observables,
                 int                              num_outcomes,
                 std::vector<Context>             contexts,
                 std::vector<ContextDistribution> distributions,
                 bool                             enforce_consistency = false);

  int         num_observables() const noexcept { return num_observables_; }
  int         num_outcomes() const noexcept { return num_outcomes_; }
  std::size_t num_contexts() const noexcept { return contexts_.size(); }
  bool        consistency_enforced() const noexcept { return consistency_enforced_; }

  std::span<Context const>   contexts() const noexcept { return contexts_; }
  Context const             &context(std::size_t index) const { return contexts_.at(index); }
  ContextDistribution const &distribution(std::size_t index) const
  {
    return distributions_.at(index);
  }

  std::optional<std::size_t> index_of(int context_id) const;

  std::size_t support_size(std::size_t index) const { return support_codes_.at(index).size(); }

  /// Largest support over all contexts (the sparsity d).
  std::size_t max_support_size() const noexcept;

  /// Base-|O| code of an outcome tuple; codes of one context are unique.
  std::uint64_t encode(std::span<OutcomeId const> tuple) const noexcept;

  /// Sorted support codes of a context.
  std::span<std::uint64_t const> support_codes(std::size_t index) const
  {
    return support_codes_.at(index);
  }

  bool   in_support(std::size_t index, std::span<OutcomeId const> tuple) const;
  double probability(std::size_t index, std::span<OutcomeId const> tuple) const;

private:
  int                                     num_observables_;
  int                                     num_outcomes_;
  std::vector<Context>                    contexts_;
  std::vector<ContextDistribution>        distributions_;
  std::vector<std::vector<std::uint64_t>> support_codes_;
  // entry index in distributions_ for each sorted support code
  std::vector<std::vector<std::size_t>> code_entry_;
  bool                                  consistency_enforced_ = false;
};

/// Marginal agreement check on every pair of intersecting contexts.
/// Reports, never throws.
std::vector<ConsistencyViolation> validate_consistency(EmpiricalModel const &model,
                                                       double tolerance = kDistributionTolerance);

}  // namespace kontext
