#include "kontext/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "kontext/error.hpp"

namespace kontext {

namespace {

void require(bool condition, std::string const &message)
{
  if (!condition)
  {
    throw InvalidModel(message);
  }
}

std::string context_name(Context const &context)
{
  return "context " + std::to_string(context.id);
}

}  // namespace

EmpiricalModel::EmpiricalModel(int                              num_observables,
                               int                              num_outcomes,
                               std::vector<Context>             contexts,
                               std::vector<ContextDistribution> distributions,
                               bool                             enforce_consistency)
  : num_observables_(num_observables)
  , num_outcomes_(num_outcomes)
  , contexts_(std::move(contexts))
  , distributions_(std::move(distributions))
{
  require(num_observables_ >= 1, "model needs at least one observable");
  require(num_outcomes_ >= 1, "model needs at least one outcome");
  require(!contexts_.empty(), "model needs at least one context");
  require(contexts_.size() == distributions_.size(),
          "one distribution per context is required");

  std::set<int>          ids;
  std::vector<bool>      covered(static_cast<std::size_t>(num_observables_), false);
  std::size_t            max_len = 0;
  for (auto const &context : contexts_)
  {
    require(ids.insert(context.id).second, "duplicate context id " + std::to_string(context.id));
    require(!context.observables.empty(), context_name(context) + " is empty");
    std::set<ObservableId> seen;
    for (ObservableId x : context.observables)
    {
      require(x >= 0 && x < num_observables_,
              context_name(context) + " references unknown observable " + std::to_string(x));
      require(seen.insert(x).second,
              context_name(context) + " repeats observable " + std::to_string(x));
      covered[static_cast<std::size_t>(x)] = true;
    }
    require(context.inputs.empty() || context.inputs.size() == context.observables.size(),
            context_name(context) + " inputs must match its observables");
    require(std::all_of(context.label.begin(), context.label.end(), [](int t) { return t >= 0; }) &&
                std::all_of(context.inputs.begin(), context.inputs.end(),
                            [](int t) { return t >= 0; }),
            context_name(context) + " has a negative setting token");
    max_len = std::max(max_len, context.observables.size());
  }
  require(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }),
          "contexts do not cover every observable");

  // Codes are base-|O| numbers of the outcome tuple and must fit 64 bits.
  double const log_space = static_cast<double>(max_len) * std::log2(static_cast<double>(num_outcomes_));
  if (log_space >= 63.0)
  {
    throw SizeLimit("outcome space |O|^|C| does not fit a 64-bit code");
  }

  support_codes_.resize(contexts_.size());
  code_entry_.resize(contexts_.size());
  for (std::size_t c = 0; c < contexts_.size(); ++c)
  {
    auto &entries = distributions_[c].entries;
    // Zero entries are not part of the support.
    std::erase_if(entries, [](WeightedOutcome const &e) { return e.p == 0.0; });
    require(!entries.empty(), context_name(contexts_[c]) + " has an empty support");

    double                                          total = 0.0;
    std::vector<std::pair<std::uint64_t, std::size_t>> coded;
    for (std::size_t e = 0; e < entries.size(); ++e)
    {
      auto const &entry = entries[e];
      require(entry.outcome.size() == contexts_[c].observables.size(),
              context_name(contexts_[c]) + " has an outcome of the wrong length");
      for (OutcomeId o : entry.outcome)
      {
        require(o >= 0 && o < num_outcomes_,
                context_name(contexts_[c]) + " has an outcome outside the alphabet");
      }
      require(std::isfinite(entry.p) && entry.p > 0.0 && entry.p <= 1.0 + kDistributionTolerance,
              context_name(contexts_[c]) + " has a probability outside [0, 1]");
      total += entry.p;
      coded.emplace_back(encode(entry.outcome), e);
    }
    require(std::abs(total - 1.0) <= kDistributionTolerance,
            context_name(contexts_[c]) + " probabilities do not sum to 1");
    std::sort(coded.begin(), coded.end());
    for (std::size_t i = 1; i < coded.size(); ++i)
    {
      require(coded[i].first != coded[i - 1].first,
              context_name(contexts_[c]) + " lists an outcome twice");
    }
    for (auto const &[code, entry] : coded)
    {
      support_codes_[c].push_back(code);
      code_entry_[c].push_back(entry);
    }
  }

  if (enforce_consistency)
  {
    auto const violations = validate_consistency(*this);
    if (!violations.empty())
    {
      auto const &v = violations.front();
      throw InvalidModel("marginals of contexts " + std::to_string(contexts_[v.first].id) + " and " +
                         std::to_string(contexts_[v.second].id) + " disagree");
    }
    consistency_enforced_ = true;
  }
}

std::optional<std::size_t> EmpiricalModel::index_of(int context_id) const
{
  for (std::size_t i = 0; i < contexts_.size(); ++i)
  {
    if (contexts_[i].id == context_id)
    {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t EmpiricalModel::max_support_size() const noexcept
{
  std::size_t d = 0;
  for (auto const &codes : support_codes_)
  {
    d = std::max(d, codes.size());
  }
  return d;
}

std::uint64_t EmpiricalModel::encode(std::span<OutcomeId const> tuple) const noexcept
{
  std::uint64_t code = 0;
  for (OutcomeId o : tuple)
  {
    code = code * static_cast<std::uint64_t>(num_outcomes_) + static_cast<std::uint64_t>(o);
  }
  return code;
}

bool EmpiricalModel::in_support(std::size_t index, std::span<OutcomeId const> tuple) const
{
  auto const &codes = support_codes_.at(index);
  return std::binary_search(codes.begin(), codes.end(), encode(tuple));
}

double EmpiricalModel::probability(std::size_t index, std::span<OutcomeId const> tuple) const
{
  auto const &codes = support_codes_.at(index);
  auto const  it    = std::lower_bound(codes.begin(), codes.end(), encode(tuple));
  if (it == codes.end() || *it != encode(tuple))
  {
    return 0.0;
  }
  auto const entry = code_entry_[index][static_cast<std::size_t>(it - codes.begin())];
  return distributions_[index].entries[entry].p;
}

std::vector<ConsistencyViolation> validate_consistency(EmpiricalModel const &model, double tolerance)
{
  std::vector<ConsistencyViolation> violations;
  auto const                        contexts = model.contexts();

  auto marginal = [&](std::size_t c, std::vector<ObservableId> const &on) {
    std::vector<std::size_t> positions;
    auto const              &obs = contexts[c].observables;
    for (ObservableId x : on)
    {
      positions.push_back(static_cast<std::size_t>(std::find(obs.begin(), obs.end(), x) - obs.begin()));
    }
    std::map<std::vector<OutcomeId>, double> result;
    for (auto const &entry : model.distribution(c).entries)
    {
      std::vector<OutcomeId> key;
      key.reserve(positions.size());
      for (std::size_t p : positions)
      {
        key.push_back(entry.outcome[p]);
      }
      result[key] += entry.p;
    }
    return result;
  };

  for (std::size_t i = 0; i < contexts.size(); ++i)
  {
    std::vector<ObservableId> a(contexts[i].observables);
    std::sort(a.begin(), a.end());
    for (std::size_t j = i + 1; j < contexts.size(); ++j)
    {
      std::vector<ObservableId> b(contexts[j].observables);
      std::sort(b.begin(), b.end());
      std::vector<ObservableId> shared;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
      if (shared.empty())
      {
        continue;
      }
      // Agreement on the full intersection implies agreement on its subsets.
      auto const mi  = marginal(i, shared);
      auto const mj  = marginal(j, shared);
      double     gap = 0.0;
      for (auto const &[key, p] : mi)
      {
        auto const it = mj.find(key);
        gap           = std::max(gap, std::abs(p - (it == mj.end() ? 0.0 : it->second)));
      }
      for (auto const &[key, p] : mj)
      {
        if (!mi.contains(key))
        {
          gap = std::max(gap, p);
        }
      }
      if (gap > tolerance)
      {
        violations.push_back({i, j, shared, gap});
      }
    }
  }
  return violations;
}

}  // namespace kontext
