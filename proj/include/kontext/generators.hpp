#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "kontext/contextuality.hpp"
#include "kontext/model.hpp"

namespace kontext {

/// Where random supports are drawn from.
enum class SupportDraw
{
  /// A shared pool of max(n, s) distinct random outcome tuples; every
  /// context picks s of them.
  SharedPool,
  /// Uniformly from all n^n outcome tuples.
  FullSpace,
};

struct RandomModelSpec
{
  int                n        = 3;
  int                sparsity = 1;
  std::uint64_t      seed     = 0;
  std::optional<int> target_k;
  SupportDraw        draw          = SupportDraw::SharedPool;
  std::size_t        max_resamples = 100'000;
  PartitionBudget    oracle_budget = {};
};

/// n observables, n outcomes, n contexts that each contain every
/// observable, uniform weights on a random support of min(s, n^n) tuples.
/// With a target k, models are redrawn from the same stream until the
/// partition oracle agrees; throws Exhausted past max_resamples.
EmpiricalModel random_model(RandomModelSpec const &spec);

inline constexpr int kMaxGhzParticles = 10;

/// Pauli x/y measurements on every particle of the n-particle GHZ state.
/// Context id is the basis string read as binary with y = 1, most
/// significant bit first; outcome 0 is +1 and 1 is -1.
EmpiricalModel ghz_model(int n_particles, int max_particles = kMaxGhzParticles);

/// Sliding-window contexts over n_contexts + n_obs_per_context - 1
/// observables with alphabet 3. Every support contains the restriction of
/// one hidden global assignment, so the model is never strongly contextual.
EmpiricalModel noncontextual_model(int n_contexts, int n_obs_per_context, std::uint64_t seed);

}  // namespace kontext
