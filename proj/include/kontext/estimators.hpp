#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kontext/compatibility.hpp"
#include "kontext/model.hpp"
#include "kontext/sections.hpp"

namespace kontext {

struct EstimatorBudget
{
  /// Nodes of the permutation-prefix tree walked by exact_bruteforce.
  std::uint64_t max_search_nodes = 50'000'000;
  /// Subsets examined while building the incompatibility hypergraph.
  std::uint64_t max_subset_checks = 100'000'000;
  SectionBudget sections          = {};
};

/// Partition of the contexts into jointly compatible parts (context ids),
/// with one witness section per part.
struct GreedyPartition
{
  std::vector<std::vector<int>> parts;
  std::vector<Section>          witness_sections;

  int k() const noexcept { return static_cast<int>(parts.size()) - 1; }
};

/// First-fit placement of contexts, visited in `order` (context indices):
/// each context joins the first part whose joint section set stays
/// nonempty, else opens a new part.
GreedyPartition greedy_partition(EmpiricalModel const        &model,
                                 std::span<std::size_t const> order,
                                 CompatibilityCache           &cache);

struct ExactResult
{
  int             k = 0;
  GreedyPartition certificate;
  std::uint64_t   search_nodes = 0;
};

/// Minimum over all context orderings of the first-fit part count, minus
/// one. Orderings share prefixes and are pruned once a prefix already
/// needs as many parts as the best complete ordering.
ExactResult exact_bruteforce(EmpiricalModel const &model, EstimatorBudget const &budget = {});

struct TracePoint
{
  std::size_t iteration = 0;  // 1-based
  int         best_k    = 0;
};

struct EstimateTrace
{
  std::vector<TracePoint> trace;
  int                     final_k = 0;
  std::uint64_t           seed    = 0;
  GreedyPartition         certificate;
};

/// First-fit over `num_permutations` seeded uniform orderings. Results do
/// not depend on the worker count.
EstimateTrace greedy_estimate(EmpiricalModel const  &model,
                              std::size_t            num_permutations,
                              std::uint64_t          seed,
                              std::size_t            threads = 1,
                              EstimatorBudget const &budget  = {});

/// Nodes are context indices; edges are minimal jointly incompatible
/// context subsets of size 2..rank.
struct IncompatibilityHypergraph
{
  std::size_t                           num_nodes = 0;
  std::vector<std::vector<std::size_t>> edges;
  std::size_t                           rank          = 0;
  std::uint64_t                         subset_checks = 0;
};

/// d + 1, capped at |M|, where d is the largest number of global
/// assignments consistent with one context. When every context contains all
/// observables, d is the largest support size.
std::size_t default_max_rank(EmpiricalModel const &model);

/// Sum of C(n, i) for i = 2..max_rank.
std::uint64_t subset_check_count(std::size_t n, std::size_t max_rank);

IncompatibilityHypergraph build_hypergraph(EmpiricalModel const  &model,
                                           std::size_t            max_rank,
                                           EstimatorBudget const &budget = {});

struct ColoringResult
{
  int                                   k = 0;
  std::vector<std::vector<std::size_t>> colors;
  std::uint64_t                         edge_checks = 0;
};

/// First-fit hypergraph colouring: a node joins the first colour class
/// whose union with it contains no edge.
ColoringResult coloring_estimate(IncompatibilityHypergraph const &graph, std::span<std::size_t const> order);

/// Identity order 0..n-1.
std::vector<std::size_t> identity_order(std::size_t n);

}  // namespace kontext
