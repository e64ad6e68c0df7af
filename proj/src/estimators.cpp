#include "kontext/estimators.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "kontext/error.hpp"
#include "kontext/parallel.hpp"
#include "kontext/rng.hpp"

namespace kontext {

namespace {

struct Part
{
  ContextMask                mask;
  CompatibilityCache::Handle sections;
  std::vector<std::size_t>   members;
};

// Joins `context` into the first compatible part, else opens a new one.
void place_first_fit(CompatibilityCache &cache, std::vector<Part> &parts, std::size_t context)
{
  for (auto &part : parts)
  {
    auto grown = cache.extend(part.mask, *part.sections, context);
    if (!grown->empty())
    {
      part.mask.set(context);
      part.sections = std::move(grown);
      part.members.push_back(context);
      return;
    }
  }
  ContextMask mask(cache.model().num_contexts());
  mask.set(context);
  parts.push_back({mask, cache.single(context), {context}});
}

GreedyPartition to_certificate(EmpiricalModel const &model, std::vector<Part> const &parts)
{
  GreedyPartition out;
  for (auto const &part : parts)
  {
    std::vector<std::size_t> members(part.members);
    std::sort(members.begin(), members.end());
    std::vector<int> ids;
    for (std::size_t c : members)
    {
      ids.push_back(model.context(c).id);
    }
    out.parts.push_back(std::move(ids));
    out.witness_sections.push_back(part.sections->section(0));
  }
  return out;
}

class ExactSearch
{
public:
  ExactSearch(EmpiricalModel const &model, EstimatorBudget const &budget)
    : model_(model)
    , budget_(budget)
    , cache_(model, budget.sections)
    , used_(model.num_contexts(), false)
  {
    auto const all = identity_order(model.num_contexts());
    lower_bound_   = is_compatible(model, all, budget.sections) ? 1 : 2;
    best_parts_    = model.num_contexts() + 1;
  }

  ExactResult run()
  {
    search(0);
    return {static_cast<int>(best_parts_) - 1, to_certificate(model_, best_), nodes_};
  }

private:
  void search(std::size_t depth)
  {
    if (++nodes_ > budget_.max_search_nodes)
    {
      throw SizeLimit("exact search exceeded " + std::to_string(budget_.max_search_nodes) + " nodes");
    }
    // Part counts never shrink along an ordering.
    if (parts_.size() >= best_parts_)
    {
      return;
    }
    if (depth == model_.num_contexts())
    {
      best_parts_ = parts_.size();
      best_       = parts_;
      return;
    }
    for (std::size_t c = 0; c < model_.num_contexts(); ++c)
    {
      if (used_[c])
      {
        continue;
      }
      auto saved = parts_;
      used_[c]   = true;
      place_first_fit(cache_, parts_, c);
      search(depth + 1);
      used_[c] = false;
      parts_   = std::move(saved);
      if (best_parts_ <= lower_bound_)
      {
        return;
      }
    }
  }

  EmpiricalModel const &model_;
  EstimatorBudget       budget_;
  CompatibilityCache    cache_;
  std::vector<bool>     used_;
  std::vector<Part>     parts_;
  std::vector<Part>     best_;
  std::size_t           best_parts_  = 0;
  std::size_t           lower_bound_ = 1;
  std::uint64_t         nodes_       = 0;
};

template <typename Visit>
void for_each_combination(std::size_t n, std::size_t r, Visit &&visit)
{
  if (r > n || r == 0)
  {
    return;
  }
  std::vector<std::size_t> idx(r);
  std::iota(idx.begin(), idx.end(), 0);
  while (true)
  {
    visit(std::as_const(idx));
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + (i - 1))
    {
      --i;
    }
    if (i == 0)
    {
      return;
    }
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j)
    {
      idx[j] = idx[j - 1] + 1;
    }
  }
}

}  // namespace

std::vector<std::size_t> identity_order(std::size_t n)
{
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

GreedyPartition greedy_partition(EmpiricalModel const        &model,
                                 std::span<std::size_t const> order,
                                 CompatibilityCache           &cache)
{
  std::vector<Part> parts;
  for (std::size_t c : order)
  {
    place_first_fit(cache, parts, c);
  }
  return to_certificate(model, parts);
}

ExactResult exact_bruteforce(EmpiricalModel const &model, EstimatorBudget const &budget)
{
  return ExactSearch(model, budget).run();
}

EstimateTrace greedy_estimate(EmpiricalModel const  &model,
                              std::size_t            num_permutations,
                              std::uint64_t          seed,
                              std::size_t            threads,
                              EstimatorBudget const &budget)
{
  if (num_permutations == 0)
  {
    throw InvalidModel("greedy_estimate needs at least one permutation");
  }
  threads = std::max<std::size_t>(1, threads);
  std::size_t const n = model.num_contexts();

  std::vector<CompatibilityCache> caches;
  caches.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
  {
    caches.emplace_back(model, budget.sections);
  }

  // Orderings are drawn sequentially from the stream, then evaluated in
  // parallel batches, so the result is independent of the worker count.
  Rng                     rng(seed);
  std::vector<int>        ks(num_permutations);
  std::size_t constexpr batch = 1024;
  std::size_t             best_index = 0;
  std::vector<std::size_t> best_order;
  for (std::size_t start = 0; start < num_permutations; start += batch)
  {
    std::size_t const                     len = std::min(batch, num_permutations - start);
    std::vector<std::vector<std::size_t>> orders(len);
    for (auto &order : orders)
    {
      order = identity_order(n);
      rng.shuffle(order);
    }
    parallel_for(len, threads, [&](std::size_t i, std::size_t worker) {
      ks[start + i] = greedy_partition(model, orders[i], caches[worker]).k();
    });
    for (std::size_t i = 0; i < len; ++i)
    {
      if (start + i == 0 || ks[start + i] < ks[best_index])
      {
        best_index = start + i;
        best_order = orders[i];
      }
    }
  }

  EstimateTrace out;
  out.seed = seed;
  int best = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < num_permutations; ++i)
  {
    best = std::min(best, ks[i]);
    out.trace.push_back({i + 1, best});
  }
  out.final_k     = best;
  out.certificate = greedy_partition(model, best_order, caches[0]);
  return out;
}

std::size_t default_max_rank(EmpiricalModel const &model)
{
  // Global assignments consistent with a context: its support times every
  // free value of the observables it does not contain.
  std::size_t const cap = model.num_contexts();
  std::size_t       d   = 0;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    std::size_t count = model.support_size(c);
    std::size_t free  = static_cast<std::size_t>(model.num_observables()) - model.context(c).observables.size();
    for (std::size_t i = 0; i < free && count < cap; ++i)
    {
      count *= static_cast<std::size_t>(model.num_outcomes());
    }
    d = std::max(d, count);
  }
  return std::min(d + 1, cap);
}

std::uint64_t subset_check_count(std::size_t n, std::size_t max_rank)
{
  unsigned __int128 total = 0;
  unsigned __int128 binom = 1;  // C(n, i)
  for (std::size_t i = 1; i <= std::min(max_rank, n); ++i)
  {
    binom = binom * (n - i + 1) / i;
    if (i >= 2)
    {
      total += binom;
    }
    if (total > std::numeric_limits<std::uint64_t>::max())
    {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(total);
}

IncompatibilityHypergraph build_hypergraph(EmpiricalModel const  &model,
                                           std::size_t            max_rank,
                                           EstimatorBudget const &budget)
{
  if (max_rank < 2)
  {
    throw InvalidModel("hypergraph rank must be at least 2");
  }
  std::size_t const n        = model.num_contexts();
  std::uint64_t const checks = subset_check_count(n, max_rank);
  if (checks > budget.max_subset_checks)
  {
    throw SizeLimit("hypergraph needs " + std::to_string(checks) + " subset checks, budget is " +
                    std::to_string(budget.max_subset_checks));
  }

  IncompatibilityHypergraph graph;
  graph.num_nodes = n;
  CompatibilityCache cache(model, budget.sections);

  // Joint sections of a sorted subset, grown from its cached prefix.
  auto joint = [&](auto &self, std::span<std::size_t const> subset) -> CompatibilityCache::Handle {
    if (subset.size() == 1)
    {
      return cache.single(subset[0]);
    }
    auto const  prefix = subset.first(subset.size() - 1);
    auto const  base   = self(self, prefix);
    ContextMask mask(n);
    for (std::size_t c : prefix)
    {
      mask.set(c);
    }
    return cache.extend(mask, *base, subset.back());
  };

  for (std::size_t size = 2; size <= std::min(max_rank, n); ++size)
  {
    for_each_combination(n, size, [&](std::vector<std::size_t> const &subset) {
      ++graph.subset_checks;
      bool const contains_edge = std::any_of(graph.edges.begin(), graph.edges.end(), [&](auto const &edge) {
        return std::includes(subset.begin(), subset.end(), edge.begin(), edge.end());
      });
      if (contains_edge)
      {
        return;
      }
      if (joint(joint, subset)->empty())
      {
        graph.edges.push_back(subset);
        graph.rank = std::max(graph.rank, size);
      }
    });
  }
  return graph;
}

ColoringResult coloring_estimate(IncompatibilityHypergraph const &graph, std::span<std::size_t const> order)
{
  std::vector<std::vector<std::size_t>> edges_of(graph.num_nodes);
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
  {
    for (std::size_t v : graph.edges[e])
    {
      edges_of[v].push_back(e);
    }
  }

  ColoringResult                 out;
  std::vector<std::vector<bool>> in_class;
  for (std::size_t v : order)
  {
    bool placed = false;
    for (std::size_t c = 0; c < out.colors.size() && !placed; ++c)
    {
      // Only edges through v can appear: the class itself is edge-free.
      bool blocked = false;
      for (std::size_t e : edges_of[v])
      {
        ++out.edge_checks;
        auto const &edge = graph.edges[e];
        if (std::all_of(edge.begin(), edge.end(), [&](std::size_t u) { return u == v || in_class[c][u]; }))
        {
          blocked = true;
          break;
        }
      }
      if (!blocked)
      {
        out.colors[c].push_back(v);
        in_class[c][v] = true;
        placed         = true;
      }
    }
    if (!placed)
    {
      out.colors.push_back({v});
      in_class.emplace_back(graph.num_nodes, false);
      in_class.back()[v] = true;
    }
  }
  out.k = static_cast<int>(out.colors.size()) - 1;
  return out;
}

}  // namespace kontext
