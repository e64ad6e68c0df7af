#include "kontext/compatibility.hpp"

#include <bit>

namespace kontext {

std::vector<std::size_t> ContextMask::members() const
{
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < words_.size(); ++w)
  {
    std::uint64_t bits = words_[w];
    while (bits != 0)
    {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return out;
}

std::size_t ContextMask::count() const
{
  std::size_t n = 0;
  for (auto w : words_)
  {
    n += static_cast<std::size_t>(std::popcount(w));
  }
  return n;
}

std::size_t ContextMask::hash() const noexcept
{
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (auto w : words_)
  {
    h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

CompatibilityCache::CompatibilityCache(EmpiricalModel const &model, SectionBudget budget, std::size_t max_entries)
  : model_(model)
  , budget_(budget)
  , max_entries_(max_entries)
{}

CompatibilityCache::Handle CompatibilityCache::remember(ContextMask const &mask, SectionSet &&sections)
{
  auto handle = std::make_shared<SectionSet const>(std::move(sections));
  if (cache_.size() < max_entries_)
  {
    cache_.emplace(mask, handle);
  }
  return handle;
}

CompatibilityCache::Handle CompatibilityCache::single(std::size_t context)
{
  ContextMask mask(model_.num_contexts());
  mask.set(context);
  if (auto it = cache_.find(mask); it != cache_.end())
  {
    return it->second;
  }
  ++computed_;
  std::size_t const one[] = {context};
  return remember(mask, sections_of(model_, one, budget_));
}

CompatibilityCache::Handle CompatibilityCache::extend(ContextMask const &base_mask,
                                                      SectionSet const  &base,
                                                      std::size_t        context)
{
  auto mask = base_mask.with(context);
  if (auto it = cache_.find(mask); it != cache_.end())
  {
    return it->second;
  }
  ++computed_;
  if (base.empty())
  {
    // Incompatibility is inherited by every superset.
    return remember(mask, SectionSet(base.domain()));
  }
  return remember(mask, extend_sections(model_, base, context, budget_));
}

}  // namespace kontext
