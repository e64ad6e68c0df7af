#include "kontext/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "kontext/contextuality.hpp"
#include "kontext/parallel.hpp"
#include "kontext/sequence.hpp"

namespace kontext {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

class CertificateSearch
{
public:
  CertificateSearch(EmpiricalModel const &model, int states, std::uint64_t max_nodes)
    : model_(model)
    , enc_(encode_sequences(model))
    , states_(states)
    , max_nodes_(max_nodes)
    , table_(static_cast<std::size_t>(states * enc_.input_alphabet))
    , prefixes_(model.num_contexts())
  {
    for (std::size_t c = 0; c < model.num_contexts(); ++c)
    {
      for (auto const &entry : model.distribution(c).entries)
      {
        for (std::size_t len = 1; len <= entry.outcome.size(); ++len)
        {
          prefixes_[c].insert(prefix_key(std::span(entry.outcome).first(len)));
        }
      }
    }
  }

  Hmm run()
  {
    if (!search())
    {
      throw CertificateUnroutable(exhausted_ ? "certificate search exceeded its node budget"
                                             : "no deterministic " + std::to_string(states_) +
                                                 "-state HMM stays inside every support");
    }
    Hmm h(states_, enc_.input_alphabet, enc_.num_outcomes);
    for (int l = 0; l < states_; ++l)
    {
      for (int x = 0; x < enc_.input_alphabet; ++x)
      {
        Entry const &e   = entry(l, x);
        int const    out = e.set && e.out != kMaskedOutput ? e.out : 0;
        int const    next = e.set ? e.next : l;
        h.emission(x).row(l).setZero();
        h.emission(x)(l, out) = 1.0;
        for (int o = 0; o < enc_.num_outcomes; ++o)
        {
          h.transition(x, o).row(l).setZero();
          bool const routed = e.set && (e.out == kMaskedOutput || e.out == o);
          h.transition(x, o)(l, routed ? next : l) = 1.0;
        }
      }
    }
    return h;
  }

private:
  struct Entry
  {
    bool set  = false;
    int  out  = kMaskedOutput;
    int  next = 0;
  };

  Entry &entry(int state, int x) { return table_[static_cast<std::size_t>(state * enc_.input_alphabet + x)]; }

  std::uint64_t prefix_key(std::span<int const> prefix) const
  {
    std::uint64_t key = 1;
    for (int o : prefix)
    {
      key = key * static_cast<std::uint64_t>(enc_.num_outcomes + 1) + static_cast<std::uint64_t>(o + 1);
    }
    return key;
  }

  bool search()
  {
    if (++nodes_ > max_nodes_)
    {
      exhausted_ = true;
      return false;
    }
    // Run every context through the partial table until an unset entry.
    for (std::size_t c = 0; c < model_.num_contexts(); ++c)
    {
      auto const      &ctx   = enc_.contexts[c];
      int              state = 0;
      std::vector<int> prefix;
      for (std::size_t t = 0; t < ctx.length(); ++t)
      {
        bool const label = t < ctx.label_length;
        int const  x     = ctx.inputs[t];
        Entry     &e     = entry(state, x);
        if (!e.set)
        {
          return branch(c, state, x, label, prefix);
        }
        if (!label)
        {
          if (e.out == kMaskedOutput)
          {
            return false;
          }
          prefix.push_back(e.out);
          if (prefixes_[c].count(prefix_key(prefix)) == 0)
          {
            return false;
          }
        }
        else if (e.out != kMaskedOutput)
        {
          return false;
        }
        state = e.next;
      }
    }
    return true;
  }

  bool branch(std::size_t c, int state, int x, bool label, std::vector<int> &prefix)
  {
    int used = 1;
    for (auto const &e : table_)
    {
      if (e.set)
      {
        used = std::max(used, e.next + 1);
      }
    }
    std::vector<int> nexts{state};
    for (int s = 0; s < std::min(used + 1, states_); ++s)
    {
      if (s != state)
      {
        nexts.push_back(s);
      }
    }
    Entry &e = entry(state, x);
    e.set    = true;
    if (label)
    {
      for (int next : nexts)
      {
        e.out  = kMaskedOutput;
        e.next = next;
        if (search())
        {
          return true;
        }
        if (exhausted_)
        {
          break;
        }
      }
    }
    else
    {
      for (int o = 0; o < enc_.num_outcomes && !exhausted_; ++o)
      {
        prefix.push_back(o);
        bool const viable = prefixes_[c].count(prefix_key(prefix)) != 0;
        prefix.pop_back();
        if (!viable)
        {
          continue;
        }
        for (int next : nexts)
        {
          e.out  = o;
          e.next = next;
          if (search())
          {
            return true;
          }
          if (exhausted_)
          {
            break;
          }
        }
      }
    }
    e = Entry{};
    return false;
  }

  EmpiricalModel const                         &model_;
  SequenceEncoding                              enc_;
  int                                           states_;
  std::uint64_t                                 max_nodes_;
  std::vector<Entry>                            table_;
  std::vector<std::unordered_set<std::uint64_t>> prefixes_;
  std::uint64_t                                 nodes_     = 0;
  bool                                          exhausted_ = false;
};

std::string format_number(double v)
{
  if (std::isnan(v))
  {
    return "nan";
  }
  if (std::isinf(v))
  {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  auto const res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t query_length(EmpiricalModel const &model)
{
  auto const enc = encode_sequences(model);
  return enc.contexts.front().query_length();
}

}  // namespace

std::vector<BenchmarkRow> estimator_benchmark(std::span<EmpiricalModel const> models, BenchmarkOptions const &options)
{
  std::vector<BenchmarkRow> rows;
  for (std::size_t i = 0; i < models.size(); ++i)
  {
    auto const  &model = models[i];
    BenchmarkRow row;
    row.model_index = i;

    auto t0         = Clock::now();
    auto const exact = exact_bruteforce(model, options.budget);
    row.exact_ms     = options.timings ? elapsed_ms(t0) : 0.0;
    row.k_exact      = exact.k;
    row.exact_nodes  = exact.search_nodes;

    t0              = Clock::now();
    auto const g    = greedy_estimate(model, options.greedy_permutations, options.seed + i, 1, options.budget);
    row.greedy_ms   = options.timings ? elapsed_ms(t0) : 0.0;
    row.k_greedy    = g.final_k;

    t0                 = Clock::now();
    auto const rank    = options.max_rank.value_or(default_max_rank(model));
    auto const graph   = build_hypergraph(model, std::max<std::size_t>(2, rank), options.budget);
    auto const colors  = coloring_estimate(graph, identity_order(model.num_contexts()));
    row.coloring_ms    = options.timings ? elapsed_ms(t0) : 0.0;
    row.k_coloring     = colors.k;
    row.subset_checks  = graph.subset_checks;
    row.edge_checks    = colors.edge_checks;
    rows.push_back(row);
  }
  return rows;
}

OverestimateHistogram overestimate_histogram(std::span<BenchmarkRow const> rows)
{
  OverestimateHistogram h;
  for (auto const &row : rows)
  {
    ++h.greedy[row.k_greedy - row.k_exact];
    ++h.coloring[row.k_coloring - row.k_exact];
  }
  return h;
}

Hmm certificate_hmm(EmpiricalModel const &model, int states, std::uint64_t max_nodes)
{
  if (states < 1)
  {
    throw InvalidModel("certificate needs at least one state");
  }
  return CertificateSearch(model, states, max_nodes).run();
}

Lemma1Report lemma1_verify(EmpiricalModel const &model, int k, Lemma1Options const &options)
{
  if (k < 0)
  {
    throw InvalidModel("contextuality number must be nonnegative");
  }
  Lemma1Report report;
  report.k               = k;
  report.definitional_ok = true;
  for (int m = 1; m <= k + 1; ++m)
  {
    auto const count = n_e_k(model, m, options.partition_budget);
    report.n_e.push_back(count);
    if ((m <= k) != (count == 0))
    {
      report.definitional_ok = false;
    }
  }

  try
  {
    Hmm const cert                     = certificate_hmm(model, k + 1, options.certificate_nodes);
    report.certificate_built           = true;
    report.certificate_clean           = support_leaks(model, cert, 0.0, 1).empty();
    report.certificate_kl_model_target = kl_divergence_model_to_target(model, cert);
  }
  catch (CertificateUnroutable const &e)
  {
    report.certificate_error = e.what();
  }

  if (options.train)
  {
    for (int m = 1; m <= k; ++m)
    {
      auto const [h, train] = baum_welch_best(model, m, options.restarts, options.baum_welch);
      TrainedCheck check;
      check.states          = m;
      check.kl_target_model = train.kl;
      check.kl_model_target = kl_divergence_model_to_target(model, h);
      auto const leaks      = leaked_mass(model, h);
      check.max_leaked_mass = *std::max_element(leaks.begin(), leaks.end());
      check.leaks           = check.max_leaked_mass > options.leak_threshold;
      check.coverage_gaps   = support_violation(model, h, 0.0).size();
      report.trained.push_back(check);
    }
  }
  return report;
}

std::vector<GapRecord> gap_sweep(SweepSpec const &spec)
{
  if (spec.dims.empty())
  {
    throw InvalidModel("sweep needs at least one dimension");
  }
  for (int m : spec.dims)
  {
    if (m < 1)
    {
      throw InvalidModel("sweep dimensions must be positive");
    }
  }

  struct ModelInfo
  {
    std::optional<int> k_true;
    int                k_est = 0;
  };
  std::vector<ModelInfo> info(spec.models.size());
  for (std::size_t i = 0; i < spec.models.size(); ++i)
  {
    auto const &model = spec.models[i].model;
    if (model.num_contexts() <= spec.exact_max_contexts)
    {
      info[i].k_true = exact_bruteforce(model).k;
    }
    info[i].k_est = greedy_estimate(model, spec.greedy_permutations, spec.seed).final_k;
  }

  std::size_t const      cells = spec.models.size() * spec.dims.size();
  std::vector<GapRecord> records(cells);
  parallel_for(cells, spec.threads, [&](std::size_t cell, std::size_t) {
    std::size_t const i     = cell / spec.dims.size();
    int const         m     = spec.dims[cell % spec.dims.size()];
    auto const       &src   = spec.models[i];
    GapRecord        &r     = records[cell];
    r.model_id              = src.id;
    r.family                = src.family;
    r.n                     = src.n;
    r.sparsity              = src.sparsity;
    r.k_true                = info[i].k_true;
    r.k_est                 = info[i].k_est;
    r.k_method              = "greedy";
    r.m                     = m;
    r.seed                  = spec.seed + 1000 * i + static_cast<std::uint64_t>(m);
    try
    {
      BaumWelchOptions bw = spec.baum_welch;
      bw.seed             = r.seed;
      auto t0             = Clock::now();
      auto const [h, ct]  = baum_welch_best(src.model, m, spec.classical_restarts, bw);
      r.runtime_c_ms      = spec.timings ? elapsed_ms(t0) : 0.0;

      QhmmOptions q = spec.qhmm;
      q.bond_dim    = m;
      q.seed        = r.seed;
      q.threads     = 1;
      t0            = Clock::now();
      auto const [mps, qt] = train_qhmm_best(src.model, q, spec.quantum_restarts);
      r.runtime_q_ms       = spec.timings ? elapsed_ms(t0) : 0.0;

      r.kl_classical = ct.kl;
      r.kl_quantum   = qt.kl;
      if (std::isfinite(r.kl_classical) && std::isfinite(r.kl_quantum))
      {
        r.gap = r.kl_classical - r.kl_quantum;
      }
      double const tokens = static_cast<double>(query_length(src.model));
      r.ll_c              = average_log_likelihood(src.model, h) / tokens;
      r.ll_q              = average_log_likelihood(src.model, mps) / tokens;
      double const n_tokens = src.n_tokens.value_or(static_cast<double>(src.model.num_contexts()) * tokens);
      double const df       = spec.df.value_or(std::max(
        1.0, static_cast<double>(mps.real_parameters()) - static_cast<double>(h.free_parameters())));
      r.lr = likelihood_ratio_test(r.ll_c, r.ll_q, n_tokens, df);
    }
    catch (Error const &e)
    {
      r.error        = e.what();
      r.kl_classical = std::numeric_limits<double>::quiet_NaN();
      r.kl_quantum   = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return records;
}

std::string gap_records_csv(std::span<GapRecord const> records)
{
  std::string out = "model_id,family,n,sparsity,k_true,k_est,k_method,m,kl_classical,kl_quantum,gap,ll_c,ll_q,"
                    "lr_stat,p_value,runtime_c_ms,runtime_q_ms,seed\n";
  for (auto const &r : records)
  {
    bool const ok = r.error.empty();
    out += r.model_id + ',' + r.family + ',' + std::to_string(r.n) + ',' + std::to_string(r.sparsity) + ',';
    out += (r.k_true ? std::to_string(*r.k_true) : std::string()) + ',';
    out += std::to_string(r.k_est) + ',' + r.k_method + ',' + std::to_string(r.m) + ',';
    out += format_number(r.kl_classical) + ',' + format_number(r.kl_quantum) + ',';
    out += (r.gap ? format_number(*r.gap) : std::string()) + ',';
    out += (ok ? format_number(r.ll_c) : std::string()) + ',' + (ok ? format_number(r.ll_q) : std::string()) + ',';
    out += (ok ? format_number(r.lr.statistic) : std::string()) + ',' +
           (ok ? format_number(r.lr.p_value) : std::string()) + ',';
    out += format_number(r.runtime_c_ms) + ',' + format_number(r.runtime_q_ms) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

}  // namespace kontext
