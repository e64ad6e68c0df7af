#include "kontext/sections.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "kontext/error.hpp"

namespace kontext {

OutcomeId Section::at(ObservableId x) const
{
  auto const it = std::lower_bound(domain.begin(), domain.end(), x);
  if (it == domain.end() || *it != x)
  {
    throw InvalidModel("observable " + std::to_string(x) + " is outside the section domain");
  }
  return values[static_cast<std::size_t>(it - domain.begin())];
}

Section SectionSet::section(std::size_t i) const
{
  auto const row = (*this)[i];
  return {domain_, std::vector<OutcomeId>(row.begin(), row.end())};
}

void SectionSet::push_back(std::span<OutcomeId const> assignment)
{
  values_.insert(values_.end(), assignment.begin(), assignment.end());
  ++count_;
}

namespace {

std::vector<ObservableId> union_domain(EmpiricalModel const &model, std::span<std::size_t const> contexts)
{
  std::vector<ObservableId> domain;
  for (std::size_t c : contexts)
  {
    auto const &obs = model.context(c).observables;
    domain.insert(domain.end(), obs.begin(), obs.end());
  }
  std::sort(domain.begin(), domain.end());
  domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
  return domain;
}

std::size_t position_of(std::vector<ObservableId> const &sorted, ObservableId x)
{
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

// Depth-first search over the domain; each context keeps the indices of
// support tuples still consistent with the partial assignment.
class SectionSearch
{
public:
  SectionSearch(EmpiricalModel const &model, std::span<std::size_t const> contexts, SectionBudget const &budget)
    : model_(model)
    , contexts_(contexts.begin(), contexts.end())
    , budget_(budget)
    , result_(union_domain(model, contexts))
  {
    auto const &domain = result_.domain();
    hits_.resize(domain.size());
    alive_.resize(contexts_.size());
    for (std::size_t slot = 0; slot < contexts_.size(); ++slot)
    {
      auto const &obs = model_.context(contexts_[slot]).observables;
      for (std::size_t p = 0; p < obs.size(); ++p)
      {
        hits_[position_of(domain, obs[p])].push_back({slot, p});
      }
      auto const n = model_.distribution(contexts_[slot]).entries.size();
      alive_[slot].resize(n);
      for (std::uint32_t i = 0; i < n; ++i)
      {
        alive_[slot][i] = i;
      }
    }
    assignment_.resize(domain.size());
    counts_.assign(static_cast<std::size_t>(model_.num_outcomes()), 0);
    marked_.assign(static_cast<std::size_t>(model_.num_outcomes()), false);
  }

  SectionSet run()
  {
    if (!contexts_.empty())
    {
      search(0);
    }
    return std::move(result_);
  }

private:
  struct Hit
  {
    std::size_t slot;
    std::size_t position;
  };

  OutcomeId tuple_value(std::size_t slot, std::uint32_t entry, std::size_t position) const
  {
    return model_.distribution(contexts_[slot]).entries[entry].outcome[position];
  }

  void search(std::size_t depth)
  {
    if (++nodes_ > budget_.max_nodes)
    {
      throw SizeLimit("section enumeration exceeded " + std::to_string(budget_.max_nodes) + " nodes");
    }
    if (depth == assignment_.size())
    {
      if (result_.size() >= budget_.max_sections)
      {
        throw SizeLimit("section set exceeded " + std::to_string(budget_.max_sections) + " sections");
      }
      result_.push_back(assignment_);
      return;
    }

    // Values offered by every context containing this observable.
    auto const &hits = hits_[depth];
    std::fill(counts_.begin(), counts_.end(), 0);
    for (auto const &hit : hits)
    {
      std::fill(marked_.begin(), marked_.end(), false);
      for (std::uint32_t entry : alive_[hit.slot])
      {
        auto const v = static_cast<std::size_t>(tuple_value(hit.slot, entry, hit.position));
        if (!marked_[v])
        {
          marked_[v] = true;
          ++counts_[v];
        }
      }
    }
    std::vector<OutcomeId> candidates;
    for (std::size_t v = 0; v < counts_.size(); ++v)
    {
      if (counts_[v] == hits.size())
      {
        candidates.push_back(static_cast<OutcomeId>(v));
      }
    }

    std::vector<std::vector<std::uint32_t>> saved(hits.size());
    for (OutcomeId value : candidates)
    {
      for (std::size_t h = 0; h < hits.size(); ++h)
      {
        auto &alive = alive_[hits[h].slot];
        saved[h]    = alive;
        std::erase_if(alive, [&](std::uint32_t entry) {
          return tuple_value(hits[h].slot, entry, hits[h].position) != value;
        });
      }
      assignment_[depth] = value;
      search(depth + 1);
      for (std::size_t h = 0; h < hits.size(); ++h)
      {
        alive_[hits[h].slot] = std::move(saved[h]);
      }
    }
  }

  EmpiricalModel const                   &model_;
  std::vector<std::size_t>                contexts_;
  SectionBudget                           budget_;
  SectionSet                              result_;
  std::vector<std::vector<Hit>>           hits_;
  std::vector<std::vector<std::uint32_t>> alive_;
  std::vector<OutcomeId>                  assignment_;
  std::vector<std::size_t>                counts_;
  std::vector<bool>                       marked_;
  std::uint64_t                           nodes_      = 0;
};

}  // namespace

SectionSet sections_of(EmpiricalModel const &model, std::span<std::size_t const> contexts, SectionBudget const &budget)
{
  for (std::size_t c : contexts)
  {
    if (c >= model.num_contexts())
    {
      throw InvalidModel("context index " + std::to_string(c) + " out of range");
    }
  }
  return SectionSearch(model, contexts, budget).run();
}

bool is_compatible(EmpiricalModel const &model, std::span<std::size_t const> contexts, SectionBudget const &budget)
{
  if (contexts.empty())
  {
    return true;
  }
  // Filter incrementally and stop as soon as the joint set empties.
  std::vector<std::size_t> order(contexts.begin(), contexts.end());
  SectionSet               joint = sections_of(model, std::span(order.data(), 1), budget);
  for (std::size_t i = 1; i < order.size() && !joint.empty(); ++i)
  {
    joint = extend_sections(model, joint, order[i], budget);
  }
  return !joint.empty();
}

SectionSet extend_sections(EmpiricalModel const &model,
                           SectionSet const     &sections,
                           std::size_t           context,
                           SectionBudget const  &budget)
{
  auto const &obs     = model.context(context).observables;
  auto const &entries = model.distribution(context).entries;
  auto const &old     = sections.domain();

  std::vector<ObservableId> domain(old);
  domain.insert(domain.end(), obs.begin(), obs.end());
  std::sort(domain.begin(), domain.end());
  domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
  SectionSet result(domain);

  if (old.empty())
  {
    // The unconstrained set over no observables holds one empty assignment.
    if (sections.size() == 0)
    {
      return result;
    }
    std::vector<OutcomeId> row(domain.size());
    for (auto const &entry : entries)
    {
      for (std::size_t p = 0; p < obs.size(); ++p)
      {
        row[position_of(domain, obs[p])] = entry.outcome[p];
      }
      result.push_back(row);
    }
    return result;
  }

  // Context positions that overlap the old domain, and those that are new.
  std::vector<std::size_t> shared_ctx;
  std::vector<std::size_t> shared_old;
  std::vector<std::size_t> fresh_ctx;
  for (std::size_t p = 0; p < obs.size(); ++p)
  {
    auto const it = std::lower_bound(old.begin(), old.end(), obs[p]);
    if (it != old.end() && *it == obs[p])
    {
      shared_ctx.push_back(p);
      shared_old.push_back(static_cast<std::size_t>(it - old.begin()));
    }
    else
    {
      fresh_ctx.push_back(p);
    }
  }

  auto const base = static_cast<std::uint64_t>(model.num_outcomes());
  auto       key_of_entry = [&](Outcome const &outcome) {
    std::uint64_t key = 0;
    for (std::size_t p : shared_ctx)
    {
      key = key * base + static_cast<std::uint64_t>(outcome[p]);
    }
    return key;
  };
  auto key_of_row = [&](std::span<OutcomeId const> row) {
    std::uint64_t key = 0;
    for (std::size_t p : shared_old)
    {
      key = key * base + static_cast<std::uint64_t>(row[p]);
    }
    return key;
  };

  if (fresh_ctx.empty())
  {
    // Pure filter: the context lies inside the old domain.
    std::vector<std::uint64_t> keys;
    keys.reserve(entries.size());
    for (auto const &entry : entries)
    {
      keys.push_back(key_of_entry(entry.outcome));
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < sections.size(); ++i)
    {
      if (std::binary_search(keys.begin(), keys.end(), key_of_row(sections[i])))
      {
        result.push_back(sections[i]);
      }
    }
    return result;
  }

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_key;
  for (std::size_t e = 0; e < entries.size(); ++e)
  {
    by_key[key_of_entry(entries[e].outcome)].push_back(e);
  }
  std::vector<std::size_t> old_to_new(old.size());
  for (std::size_t i = 0; i < old.size(); ++i)
  {
    old_to_new[i] = position_of(domain, old[i]);
  }
  std::vector<std::size_t> fresh_to_new;
  for (std::size_t p : fresh_ctx)
  {
    fresh_to_new.push_back(position_of(domain, obs[p]));
  }

  std::vector<OutcomeId> row(domain.size());
  for (std::size_t i = 0; i < sections.size(); ++i)
  {
    auto const src = sections[i];
    auto const it  = by_key.find(key_of_row(src));
    if (it == by_key.end())
    {
      continue;
    }
    for (std::size_t k = 0; k < old.size(); ++k)
    {
      row[old_to_new[k]] = src[k];
    }
    for (std::size_t e : it->second)
    {
      for (std::size_t f = 0; f < fresh_ctx.size(); ++f)
      {
        row[fresh_to_new[f]] = entries[e].outcome[fresh_ctx[f]];
      }
      if (result.size() >= budget.max_sections)
      {
        throw SizeLimit("section set exceeded " + std::to_string(budget.max_sections) + " sections");
      }
      result.push_back(row);
    }
  }
  return result;
}

bool restricts_into(EmpiricalModel const        &model,
                    std::span<ObservableId const> domain,
                    std::span<OutcomeId const>    assignment,
                    std::size_t                   context)
{
  auto const            &obs = model.context(context).observables;
  std::vector<OutcomeId> tuple;
  tuple.reserve(obs.size());
  for (ObservableId x : obs)
  {
    auto const it = std::lower_bound(domain.begin(), domain.end(), x);
    if (it == domain.end() || *it != x)
    {
      return false;
    }
    tuple.push_back(assignment[static_cast<std::size_t>(it - domain.begin())]);
  }
  return model.in_support(context, tuple);
}

}  // namespace kontext
