#include "kontext/contextuality.hpp"

#include <limits>
#include <string>
#include <vector>

#include "kontext/compatibility.hpp"
#include "kontext/error.hpp"

namespace kontext {

namespace {

// Restricted-growth enumeration of set partitions. Parts whose joint
// section set is empty are never extended: every superset of an
// incompatible part is incompatible, so those branches contribute zero.
class PartitionSearch
{
public:
  PartitionSearch(EmpiricalModel const &model, int max_parts, PartitionBudget const &budget, bool stop_at_first)
    : model_(model)
    , max_parts_(static_cast<std::size_t>(max_parts))
    , budget_(budget)
    , stop_at_first_(stop_at_first)
    , cache_(model, budget.sections)
  {}

  std::uint64_t run()
  {
    search(0);
    return total_;
  }

private:
  struct Part
  {
    ContextMask                mask;
    CompatibilityCache::Handle sections;
  };

  void search(std::size_t next)
  {
    if (++nodes_ > budget_.max_nodes)
    {
      throw SizeLimit("partition search exceeded " + std::to_string(budget_.max_nodes) + " nodes");
    }
    if (next == model_.num_contexts())
    {
      unsigned __int128 product = 1;
      for (auto const &part : parts_)
      {
        product *= part.sections->size();
        if (product > std::numeric_limits<std::uint64_t>::max())
        {
          throw SizeLimit("N_e^k does not fit 64 bits");
        }
      }
      unsigned __int128 const sum = static_cast<unsigned __int128>(total_) + product;
      if (sum > std::numeric_limits<std::uint64_t>::max())
      {
        throw SizeLimit("N_e^k does not fit 64 bits");
      }
      total_ = static_cast<std::uint64_t>(sum);
      return;
    }

    for (std::size_t j = 0; j < parts_.size() && !done(); ++j)
    {
      auto grown = cache_.extend(parts_[j].mask, *parts_[j].sections, next);
      if (grown->empty())
      {
        continue;
      }
      Part saved = parts_[j];
      parts_[j]  = {parts_[j].mask.with(next), std::move(grown)};
      search(next + 1);
      parts_[j] = std::move(saved);
    }
    if (parts_.size() < max_parts_ && !done())
    {
      ContextMask mask(model_.num_contexts());
      mask.set(next);
      parts_.push_back({mask, cache_.single(next)});
      search(next + 1);
      parts_.pop_back();
    }
  }

  bool done() const { return stop_at_first_ && total_ > 0; }

  EmpiricalModel const &model_;
  std::size_t           max_parts_;
  PartitionBudget       budget_;
  bool                  stop_at_first_;
  CompatibilityCache    cache_;
  std::vector<Part>     parts_;
  std::uint64_t         nodes_ = 0;
  std::uint64_t         total_ = 0;
};

void check_k(int k)
{
  if (k < 1)
  {
    throw InvalidModel("k must be positive");
  }
}

}  // namespace

std::uint64_t n_e_k(EmpiricalModel const &model, int k, PartitionBudget const &budget)
{
  check_k(k);
  return PartitionSearch(model, k, budget, false).run();
}

bool has_compatible_partition(EmpiricalModel const &model, int max_parts, PartitionBudget const &budget)
{
  check_k(max_parts);
  return PartitionSearch(model, max_parts, budget, true).run() > 0;
}

int contextuality_number_definitional(EmpiricalModel const &model, PartitionBudget const &budget)
{
  auto const n = static_cast<int>(model.num_contexts());
  for (int parts = 1; parts < n; ++parts)
  {
    if (has_compatible_partition(model, parts, budget))
    {
      return parts - 1;
    }
  }
  // Singletons are always compatible.
  return n - 1;
}

}  // namespace kontext
