#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "kontext/model.hpp"
#include "kontext/sections.hpp"

namespace kontext {

/// Set of context indices as a growable bitset.
class ContextMask
{
public:
  ContextMask() = default;
  explicit ContextMask(std::size_t num_contexts) : words_((num_contexts + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

  ContextMask with(std::size_t i) const
  {
    ContextMask copy(*this);
    copy.set(i);
    return copy;
  }

  std::vector<std::size_t> members() const;
  std::size_t              count() const;

  bool operator==(ContextMask const &) const = default;

  std::size_t hash() const noexcept;

private:
  std::vector<std::uint64_t> words_;
};

struct ContextMaskHash
{
  std::size_t operator()(ContextMask const &m) const noexcept { return m.hash(); }
};

/// Memoised joint section sets of context subsets, grown one context at a
/// time. Not thread-safe; give each worker its own cache.
class CompatibilityCache
{
public:
  using Handle = std::shared_ptr<SectionSet const>;

  explicit CompatibilityCache(EmpiricalModel const &model,
                              SectionBudget         budget      = {},
                              std::size_t           max_entries = std::size_t{1} << 20);

  EmpiricalModel const &model() const noexcept { return model_; }

  /// Sections of the single context.
  Handle single(std::size_t context);

  /// Sections of `base_mask + context`, derived from the sections of
  /// `base_mask` when not cached.
  Handle extend(ContextMask const &base_mask, SectionSet const &base, std::size_t context);

  /// Number of joint-section computations actually performed.
  std::uint64_t computed() const noexcept { return computed_; }

private:
  Handle remember(ContextMask const &mask, SectionSet &&sections);

  EmpiricalModel const                                  &model_;
  SectionBudget                                          budget_;
  std::size_t                                            max_entries_;
  std::unordered_map<ContextMask, Handle, ContextMaskHash> cache_;
  std::uint64_t                                          computed_ = 0;
};

}  // namespace kontext
