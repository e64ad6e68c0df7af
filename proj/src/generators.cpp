#include "kontext/generators.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "kontext/error.hpp"
#include "kontext/rng.hpp"

namespace kontext {

namespace {

std::uint64_t power_capped(std::uint64_t base, int exponent, std::uint64_t cap)
{
  std::uint64_t value = 1;
  for (int i = 0; i < exponent && value < cap; ++i)
  {
    value *= base;
  }
  return std::min(value, cap);
}

Outcome decode(std::uint64_t code, int length, int alphabet)
{
  Outcome tuple(static_cast<std::size_t>(length));
  for (int i = length - 1; i >= 0; --i)
  {
    tuple[static_cast<std::size_t>(i)] = static_cast<OutcomeId>(code % static_cast<std::uint64_t>(alphabet));
    code /= static_cast<std::uint64_t>(alphabet);
  }
  return tuple;
}

// `count` distinct codes below `space`, ascending.
std::vector<std::uint64_t> distinct_codes(Rng &rng, std::uint64_t space, std::size_t count)
{
  std::set<std::uint64_t> picked;
  if (count * 2 > space)
  {
    std::vector<std::uint64_t> all(space);
    for (std::uint64_t i = 0; i < space; ++i)
    {
      all[i] = i;
    }
    rng.shuffle(all);
    picked.insert(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  }
  else
  {
    while (picked.size() < count)
    {
      picked.insert(rng.below(space));
    }
  }
  return {picked.begin(), picked.end()};
}

ContextDistribution uniform_over(std::vector<Outcome> support)
{
  std::sort(support.begin(), support.end());
  ContextDistribution dist;
  double const        p = 1.0 / static_cast<double>(support.size());
  for (auto &tuple : support)
  {
    dist.entries.push_back({std::move(tuple), p});
  }
  return dist;
}

EmpiricalModel draw_random(RandomModelSpec const &spec, Rng &rng)
{
  int const           n     = spec.n;
  std::uint64_t const space = power_capped(static_cast<std::uint64_t>(n), n, std::uint64_t{1} << 62);
  std::uint64_t const s     = std::min<std::uint64_t>(static_cast<std::uint64_t>(spec.sparsity), space);

  std::vector<std::uint64_t> pool;
  if (spec.draw == SupportDraw::SharedPool)
  {
    pool = distinct_codes(rng, space, static_cast<std::size_t>(std::max<std::uint64_t>(s, static_cast<std::uint64_t>(n))));
  }

  std::vector<Context>             contexts;
  std::vector<ContextDistribution> dists;
  std::vector<ObservableId>        all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
  {
    all[static_cast<std::size_t>(i)] = i;
  }
  for (int c = 0; c < n; ++c)
  {
    std::vector<Outcome> support;
    if (spec.draw == SupportDraw::SharedPool)
    {
      for (std::uint64_t slot : distinct_codes(rng, pool.size(), static_cast<std::size_t>(s)))
      {
        support.push_back(decode(pool[slot], n, n));
      }
    }
    else
    {
      for (std::uint64_t code : distinct_codes(rng, space, static_cast<std::size_t>(s)))
      {
        support.push_back(decode(code, n, n));
      }
    }
    contexts.push_back({c, all, {}, {}});
    dists.push_back(uniform_over(std::move(support)));
  }
  return EmpiricalModel(n, n, std::move(contexts), std::move(dists));
}

}  // namespace

EmpiricalModel random_model(RandomModelSpec const &spec)
{
  if (spec.n < 2)
  {
    throw InvalidModel("random model needs n >= 2");
  }
  if (spec.sparsity < 1)
  {
    throw InvalidModel("random model needs sparsity >= 1");
  }
  if (power_capped(static_cast<std::uint64_t>(spec.n), spec.n, std::uint64_t{1} << 62) >= (std::uint64_t{1} << 62))
  {
    throw SizeLimit("outcome space n^n too large for n = " + std::to_string(spec.n));
  }
  Rng rng(spec.seed);
  if (!spec.target_k)
  {
    return draw_random(spec, rng);
  }
  for (std::size_t attempt = 0; attempt < spec.max_resamples; ++attempt)
  {
    EmpiricalModel model = draw_random(spec, rng);
    if (contextuality_number_definitional(model, spec.oracle_budget) == *spec.target_k)
    {
      return model;
    }
  }
  throw Exhausted("no model with k = " + std::to_string(*spec.target_k) + " after " +
                  std::to_string(spec.max_resamples) + " draws (n = " + std::to_string(spec.n) +
                  ", s = " + std::to_string(spec.sparsity) + ")");
}

EmpiricalModel ghz_model(int n_particles, int max_particles)
{
  if (n_particles < 2)
  {
    throw InvalidModel("GHZ model needs at least 2 particles");
  }
  if (n_particles > max_particles)
  {
    throw SizeLimit("GHZ model with " + std::to_string(n_particles) + " particles exceeds the limit of " +
                    std::to_string(max_particles));
  }
  int const                 n = n_particles;
  std::uint64_t const       contexts_count = std::uint64_t{1} << n;
  std::vector<ObservableId> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
  {
    all[static_cast<std::size_t>(i)] = i;
  }

  std::vector<Context>             contexts;
  std::vector<ContextDistribution> dists;
  for (std::uint64_t basis = 0; basis < contexts_count; ++basis)
  {
    std::vector<int> bits = decode(basis, n, 2);
    int const        w    = static_cast<int>(std::count(bits.begin(), bits.end(), 1));
    std::vector<Outcome> support;
    for (std::uint64_t code = 0; code < contexts_count; ++code)
    {
      Outcome   tuple = decode(code, n, 2);
      int const minus = static_cast<int>(std::count(tuple.begin(), tuple.end(), 1));
      bool const keep = (w % 2 == 1) || (w % 4 == 0 ? minus % 2 == 0 : minus % 2 == 1);
      if (keep)
      {
        support.push_back(std::move(tuple));
      }
    }
    contexts.push_back({static_cast<int>(basis), all, {}, std::move(bits)});
    dists.push_back(uniform_over(std::move(support)));
  }
  return EmpiricalModel(n, 2, std::move(contexts), std::move(dists));
}

EmpiricalModel noncontextual_model(int n_contexts, int n_obs_per_context, std::uint64_t seed)
{
  if (n_contexts < 1 || n_obs_per_context < 1)
  {
    throw InvalidModel("noncontextual model needs positive sizes");
  }
  int constexpr alphabet = 3;
  int const n_obs        = n_contexts + n_obs_per_context - 1;
  Rng       rng(seed);

  std::vector<OutcomeId> hidden(static_cast<std::size_t>(n_obs));
  for (auto &v : hidden)
  {
    v = static_cast<OutcomeId>(rng.below(alphabet));
  }

  std::uint64_t const space = power_capped(alphabet, n_obs_per_context, std::uint64_t{1} << 62);
  std::vector<Context>             contexts;
  std::vector<ContextDistribution> dists;
  for (int c = 0; c < n_contexts; ++c)
  {
    std::vector<ObservableId> obs;
    Outcome                   restriction;
    for (int j = 0; j < n_obs_per_context; ++j)
    {
      obs.push_back(c + j);
      restriction.push_back(hidden[static_cast<std::size_t>(c + j)]);
    }
    std::set<Outcome> support{restriction};
    auto const        extra = std::min<std::uint64_t>(rng.below(3), space - 1);
    while (support.size() < 1 + extra)
    {
      support.insert(decode(rng.below(space), n_obs_per_context, alphabet));
    }
    contexts.push_back({c, std::move(obs), {}, {}});
    dists.push_back(uniform_over({support.begin(), support.end()}));
  }
  return EmpiricalModel(n_obs, alphabet, std::move(contexts), std::move(dists));
}

}  // namespace kontext
