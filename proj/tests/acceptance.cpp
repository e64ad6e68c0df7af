// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exits 0 so that it can sit in the regular test run; --strict turns any
// FAIL into exit code 1.

#include <boost/math/special_functions/gamma.hpp>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "ghz_oracle.hpp"
#include "kontext/contextuality.hpp"
#include "kontext/estimators.hpp"
#include "kontext/experiments.hpp"
#include "kontext/generators.hpp"
#include "kontext/hmm.hpp"
#include "kontext/mps.hpp"
#include "kontext/stats.hpp"

using namespace kontext;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(bool ok, std::string const &name, std::string const &detail)
{
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += ok ? 0 : 1;
}

void note(std::string const &text) { std::cout << "     " << text << std::endl; }

std::string fmt(double v, int precision = 4)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

EmpiricalModel random_full(int n, int s, std::uint64_t seed, std::optional<int> k = {})
{
  RandomModelSpec spec;
  spec.n        = n;
  spec.sparsity = s;
  spec.seed     = seed;
  spec.target_k = k;
  return random_model(spec);
}

// ---------------------------------------------------------------- estimators

std::vector<EmpiricalModel> benchmark_models()
{
  std::vector<EmpiricalModel> models;
  for (int n = 3; n <= 8; ++n)
  {
    for (int i = 0; i < 200; ++i)
    {
      models.push_back(random_full(n, 1 + i % n, static_cast<std::uint64_t>(n) * 10'000 + static_cast<std::uint64_t>(i)));
    }
  }
  return models;
}

void exactness_and_overestimates()
{
  auto const models = benchmark_models();
  auto const t0     = Clock::now();
  std::size_t agree = 0;
  std::vector<int> exact(models.size());
  for (std::size_t i = 0; i < models.size(); ++i)
  {
    exact[i] = exact_bruteforce(models[i]).k;
    agree += exact[i] == contextuality_number_definitional(models[i]) ? 1 : 0;
  }
  double const secs = seconds_since(t0);
  report(agree == models.size() && secs < 600.0, "exactness",
         std::to_string(agree) + "/" + std::to_string(models.size()) + " exact == definitional, " + fmt(secs) +
           " s (limit 600 s)");

  BenchmarkOptions opts;
  opts.greedy_permutations = 1;
  opts.seed                = 1;
  opts.timings             = false;
  auto const  rows         = estimator_benchmark(models, opts);
  std::size_t under_g = 0, under_c = 0, near_g = 0, near_c = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
  {
    under_g += rows[i].k_greedy < exact[i] ? 1 : 0;
    under_c += rows[i].k_coloring < exact[i] ? 1 : 0;
    near_g += rows[i].k_greedy - exact[i] <= 1 ? 1 : 0;
    near_c += rows[i].k_coloring - exact[i] <= 1 ? 1 : 0;
  }
  double const fg = static_cast<double>(near_g) / static_cast<double>(rows.size());
  double const fc = static_cast<double>(near_c) / static_cast<double>(rows.size());
  report(under_g == 0 && under_c == 0 && fg >= 0.7 && fc >= 0.7, "never-underestimate",
         "underestimates greedy " + std::to_string(under_g) + ", coloring " + std::to_string(under_c) +
           "; overestimate in {0,1}: greedy " + fmt(100 * fg) + "%, coloring " + fmt(100 * fc) + "% (need 70%)");
  auto const hist = overestimate_histogram(rows);
  std::string g = "greedy overestimate histogram:", c = "coloring overestimate histogram:";
  for (auto const &[k, n] : hist.greedy)
  {
    g += " +" + std::to_string(k) + ":" + std::to_string(n);
  }
  for (auto const &[k, n] : hist.coloring)
  {
    c += " +" + std::to_string(k) + ":" + std::to_string(n);
  }
  note(g);
  note(c);
}

void ghz_numbers()
{
  auto const t0 = Clock::now();
  bool       ok = true;
  std::string detail;
  for (int n = 3; n <= 4; ++n)
  {
    int const k = contextuality_number_definitional(ghz_model(n));
    ok          = ok && k == 1;
    detail += "def(" + std::to_string(n) + ")=" + std::to_string(k) + " ";
  }
  for (int n = 3; n <= 7; ++n)
  {
    int const k = exact_bruteforce(ghz_model(n)).k;
    ok          = ok && k == 1;
    detail += "exact(" + std::to_string(n) + ")=" + std::to_string(k) + " ";
  }
  for (int n = 3; n <= 9; ++n)
  {
    int const k = greedy_estimate(ghz_model(n), 100, static_cast<std::uint64_t>(n)).final_k;
    ok          = ok && k == 1;
    detail += "greedy(" + std::to_string(n) + ")=" + std::to_string(k) + " ";
  }
  double const secs = seconds_since(t0);
  report(ok && secs < 1800.0, "ghz-contextuality", detail + fmt(secs) + " s (limit 1800 s)");
}

void ghz_statevector()
{
  double worst = 0.0;
  for (int n = 2; n <= 6; ++n)
  {
    auto const m = ghz_model(n);
    for (std::size_t c = 0; c < m.num_contexts(); ++c)
    {
      auto const ref = oracle::ghz_statevector(m.context(c).inputs);
      double     tv  = 0.0;
      for (auto const &[t, p] : ref)
      {
        tv += std::abs(p - m.probability(c, t));
      }
      worst = std::max(worst, tv / 2.0);
    }
  }
  report(worst <= 1e-10, "ghz-statevector", "max total variation " + fmt(worst) + " over n = 2..6 (limit 1e-10)");
}

// -------------------------------------------------------------------- state bounds

void state_lower_bound()
{
  auto const  t0           = Clock::now();
  std::size_t models       = 0, definitional = 0, contextual = 0;
  std::size_t literal      = 0, leaking = 0, cert_built = 0, cert_clean = 0;
  std::size_t trained_runs = 0, trained_inf = 0, trained_leak = 0;
  for (int n = 3; n <= 6; ++n)
  {
    for (int k = 0; k < n; ++k)
    {
      for (int i = 0; i < 3; ++i)
      {
        auto const seed = static_cast<std::uint64_t>(n * 1000 + k * 10 + i);
        // two-tuple supports from a shared pool cannot reach every k
        std::optional<EmpiricalModel> drawn;
        try
        {
          drawn = random_full(n, 1 + i % 2, seed, k);
        }
        catch (Exhausted const &)
        {
          drawn = random_full(n, 1, seed, k);
        }
        auto const &m = *drawn;
        auto const r = lemma1_verify(m, k);
        ++models;
        definitional += r.definitional_ok ? 1 : 0;
        if (k == 0)
        {
          continue;
        }
        ++contextual;
        cert_built += r.certificate_built ? 1 : 0;
        cert_clean += r.certificate_clean ? 1 : 0;
        bool all_inf = true, all_leak = true;
        for (auto const &t : r.trained)
        {
          ++trained_runs;
          trained_inf += std::isinf(t.kl_target_model) ? 1 : 0;
          trained_leak += t.leaks ? 1 : 0;
          all_inf  = all_inf && std::isinf(t.kl_target_model);
          all_leak = all_leak && t.leaks;
        }
        literal += all_inf ? 1 : 0;
        leaking += all_leak ? 1 : 0;
      }
    }
  }
  double const rate = static_cast<double>(literal) / static_cast<double>(contextual);
  report(definitional == models && rate >= 0.95, "state-lower-bound",
         "definitional " + std::to_string(definitional) + "/" + std::to_string(models) +
           "; infinite D(e||p) at every m <= k on " + std::to_string(literal) + "/" + std::to_string(contextual) +
           " contextual models (need 95%)");
  note("trained runs with infinite D(e||p): " + std::to_string(trained_inf) + "/" + std::to_string(trained_runs));
  note("mass outside the support (> 1e-3) at every m <= k: " + std::to_string(leaking) + "/" +
       std::to_string(contextual) + " models, " + std::to_string(trained_leak) + "/" + std::to_string(trained_runs) +
       " runs");
  note("(k+1)-state certificate built " + std::to_string(cert_built) + "/" + std::to_string(contextual) +
       ", leak-free " + std::to_string(cert_clean) + "/" + std::to_string(contextual) + "; " +
       fmt(seconds_since(t0)) + " s");
}

// Compatibility of full contexts: their supports share a tuple.
bool supports_intersect(EmpiricalModel const &m, std::vector<std::size_t> const &subset)
{
  std::set<Outcome> common;
  for (auto const &e : m.distribution(subset[0]).entries)
  {
    common.insert(e.outcome);
  }
  for (std::size_t i = 1; i < subset.size(); ++i)
  {
    std::set<Outcome> next;
    for (auto const &e : m.distribution(subset[i]).entries)
    {
      if (common.count(e.outcome))
      {
        next.insert(e.outcome);
      }
    }
    common.swap(next);
  }
  return !common.empty();
}

void bounded_rank_edges()
{
  std::size_t checked = 0, mismatched = 0, models = 0;
  for (std::uint64_t i = 0; i < 100; ++i)
  {
    int const  n = 3 + static_cast<int>(i % 5);
    int const  d = 1 + static_cast<int>(i % 3);
    auto const m = random_full(n, d, 70'000 + i);
    auto const g = build_hypergraph(m, std::min<std::size_t>(static_cast<std::size_t>(d) + 1, m.num_contexts()));
    ++models;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask)
    {
      std::vector<std::size_t> subset;
      for (int c = 0; c < n; ++c)
      {
        if (mask & (1u << c))
        {
          subset.push_back(static_cast<std::size_t>(c));
        }
      }
      bool const has_edge = std::any_of(g.edges.begin(), g.edges.end(), [&](auto const &e) {
        return std::includes(subset.begin(), subset.end(), e.begin(), e.end());
      });
      ++checked;
      mismatched += supports_intersect(m, subset) == !has_edge ? 0 : 1;
    }
  }
  report(mismatched == 0, "bounded-rank-edges",
         std::to_string(checked - mismatched) + "/" + std::to_string(checked) + " subsets of " +
           std::to_string(models) + " models (d <= 3, n <= 7) agree with the rank d+1 hypergraph");
}

// ------------------------------------------------------------------ numerics

double hmm_paths(Hmm const &h, std::vector<int> const &x, std::vector<int> const &o)
{
  std::function<double(std::size_t, int)> rec = [&](std::size_t t, int state) -> double {
    if (t == x.size())
    {
      return 1.0;
    }
    double total = 0.0;
    for (int next = 0; next < h.states(); ++next)
    {
      total += h.emission(x[t])(state, o[t]) * h.transition(x[t], o[t])(state, next) * rec(t + 1, next);
    }
    return total;
  };
  return rec(0, h.initial_state());
}

void hmm_numerics()
{
  Rng    rng(2024);
  double worst = 0.0;
  for (int states = 1; states <= 4; ++states)
  {
    for (int len = 1; len <= 5; ++len)
    {
      Hmm const h = Hmm::random(states, 3, 3, rng);
      for (int trial = 0; trial < 20; ++trial)
      {
        std::vector<int> x, o;
        for (int t = 0; t < len; ++t)
        {
          x.push_back(static_cast<int>(rng.below(3)));
          o.push_back(static_cast<int>(rng.below(3)));
        }
        double const ref = hmm_paths(h, x, o);
        worst            = std::max(worst, std::abs(hmm_prob(h, x, o) - ref) / ref);
      }
    }
  }
  std::size_t monotone = 0;
  double      worst_drop = 0.0;
  for (std::uint64_t run = 0; run < 50; ++run)
  {
    auto const       m = random_full(3 + static_cast<int>(run % 4), 1 + static_cast<int>(run % 3), 800 + run);
    BaumWelchOptions o;
    o.seed                 = run;
    auto const [h, report] = baum_welch(m, 1 + static_cast<int>(run % 4), o);
    bool ok = true;
    for (std::size_t i = 1; i < report.log_likelihood.size(); ++i)
    {
      double const drop = report.log_likelihood[i - 1] - report.log_likelihood[i];
      worst_drop        = std::max(worst_drop, drop);
      ok                = ok && drop <= 1e-9;
    }
    monotone += ok ? 1 : 0;
  }
  report(worst <= 1e-10 && monotone == 50, "hmm-numerics",
         "forward vs paths max relative error " + fmt(worst) + " (limit 1e-10); EM nondecreasing on " +
           std::to_string(monotone) + "/50 runs, largest drop " + fmt(worst_drop));
}

MpsModel random_chain(int len, int in_dim, int out_dim, int bond, Rng &rng)
{
  std::vector<MpsSite> sites;
  for (int i = 0; i < len; ++i)
  {
    MpsSite s;
    s.in_dim  = in_dim;
    s.out_dim = out_dim;
    s.left    = i == 0 ? 1 : bond;
    s.right   = i + 1 == len ? 1 : bond;
    for (int p = 0; p < s.phys_dim(); ++p)
    {
      Eigen::MatrixXcd b(s.left, s.right);
      for (Eigen::Index r = 0; r < b.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < b.cols(); ++c)
        {
          double const re = rng.normal();
          b(r, c)         = Complex(re, rng.normal());
        }
      }
      s.blocks.push_back(b);
    }
    sites.push_back(std::move(s));
  }
  return MpsModel(std::move(sites));
}

Complex amplitude_paths(MpsModel const &mps, std::vector<int> const &tokens)
{
  std::function<Complex(std::size_t, Eigen::Index)> rec = [&](std::size_t i, Eigen::Index left) -> Complex {
    if (i == mps.length())
    {
      return 1.0;
    }
    auto const &b   = mps.site(i).blocks[static_cast<std::size_t>(tokens[i])];
    Complex     sum = 0.0;
    for (Eigen::Index r = 0; r < b.cols(); ++r)
    {
      sum += b(left, r) * rec(i + 1, r);
    }
    return sum;
  };
  return rec(0, 0);
}

void qhmm_numerics()
{
  Rng rng(77);
  // 8 sites over binary outputs with one input: 2^8 sequences
  auto mps = random_chain(8, 1, 2, 3, rng);
  normalize(mps);
  double born = 0.0;
  for (int code = 0; code < 256; ++code)
  {
    std::vector<int> t;
    for (int i = 0; i < 8; ++i)
    {
      t.push_back((code >> i) & 1);
    }
    born += std::norm(amplitude(mps, t));
  }
  // 4 sites, 2 inputs, 2 outputs: conditional normalisation for every input
  auto   cond      = random_chain(4, 2, 2, 2, rng);
  double cond_err  = 0.0;
  for (int xc = 0; xc < 16; ++xc)
  {
    std::vector<int> x;
    for (int i = 0; i < 4; ++i)
    {
      x.push_back((xc >> i) & 1);
    }
    double sum = 0.0;
    for (int oc = 0; oc < 16; ++oc)
    {
      std::vector<int> o;
      for (int i = 0; i < 4; ++i)
      {
        o.push_back((oc >> i) & 1);
      }
      sum += output_prob(cond, x, o);
    }
    cond_err = std::max(cond_err, std::abs(sum - 1.0));
  }
  double const norm_err = std::max(std::abs(born - 1.0), cond_err);

  auto const dense     = random_chain(4, 1, 3, 3, rng);
  double     total     = 0.0;
  std::vector<std::pair<std::vector<int>, double>> refs;
  for (int code = 0; code < 81; ++code)
  {
    std::vector<int> t;
    int              rest = code;
    for (int i = 0; i < 4; ++i)
    {
      t.push_back(rest % 3);
      rest /= 3;
    }
    double const w = std::norm(amplitude_paths(dense, t));
    total += w;
    refs.emplace_back(t, w);
  }
  double dense_err = 0.0;
  for (auto const &[t, w] : refs)
  {
    dense_err = std::max(dense_err, std::abs(born_prob(dense, t) - w / total) / (w / total));
  }

  auto const m   = random_full(4, 2, 3);
  auto const enc = encode_sequences(m);
  auto       q   = MpsModel::random(enc, 3, rng);
  std::vector<MpsSite> grad;
  mps_loss(q, m, enc, &grad);
  double const h = 1e-6;
  double       diff_sq = 0.0, norm_sq = 0.0;
  for (std::size_t i = 0; i < q.length(); ++i)
  {
    for (std::size_t b = 0; b < q.site(i).blocks.size(); ++b)
    {
      auto &block = q.site(i).blocks[b];
      for (Eigen::Index r = 0; r < block.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < block.cols(); ++c)
        {
          for (Complex dir : {Complex(1, 0), Complex(0, 1)})
          {
            Complex const saved = block(r, c);
            block(r, c)         = saved + h * dir;
            double const up     = mps_loss(q, m, enc);
            block(r, c)         = saved - h * dir;
            double const down   = mps_loss(q, m, enc);
            block(r, c)         = saved;
            double const fd     = (up - down) / (2 * h);
            Complex const g     = grad[i].blocks[b](r, c);
            double const an     = dir.real() != 0 ? g.real() : g.imag();
            diff_sq += (fd - an) * (fd - an);
            norm_sq += an * an;
          }
        }
      }
    }
  }
  double const grad_err = std::sqrt(diff_sq / norm_sq);
  report(norm_err <= 1e-8 && dense_err <= 1e-10 && grad_err <= 1e-4, "qhmm-numerics",
         "normalisation error " + fmt(norm_err) + " (limit 1e-8); dense-oracle relative error " + fmt(dense_err) +
           " (limit 1e-10); gradient relative error " + fmt(grad_err) + " (limit 1e-4)");
}

// -------------------------------------------------------------- experiments

void gap_direction()
{
  auto const t0 = Clock::now();
  SweepSpec  ghz;
  for (int n = 3; n <= 5; ++n)
  {
    ghz.models.push_back({"ghz-" + std::to_string(n), "ghz", n, 0, ghz_model(n), {}});
  }
  ghz.dims = {2, 8};
  ghz.seed = 11;
  auto const rows = gap_sweep(ghz);
  bool       ghz_ok = true;
  for (int n = 3; n <= 5; ++n)
  {
    auto const &at2 = rows[static_cast<std::size_t>((n - 3) * 2)];
    auto const &at8 = rows[static_cast<std::size_t>((n - 3) * 2 + 1)];
    bool const  q_below = at2.kl_quantum < at2.kl_classical;
    bool const  shrinks = at2.gap && at8.gap && *at8.gap < *at2.gap;
    ghz_ok              = ghz_ok && q_below && shrinks;
    note("ghz-" + std::to_string(n) + ": m=2 classical " + fmt(at2.kl_classical) + " quantum " +
         fmt(at2.kl_quantum) + "; m=8 classical " + fmt(at8.kl_classical) + " quantum " + fmt(at8.kl_quantum));
  }

  SweepSpec rnd;
  rnd.dims = {4};
  rnd.seed = 7;
  for (int k = 1; k <= 5; ++k)
  {
    for (int i = 0; i < 10; ++i)
    {
      rnd.models.push_back({"r" + std::to_string(k) + "-" + std::to_string(i), "random", 6, 1,
                            random_full(6, 1, static_cast<std::uint64_t>(1000 * k + i), k), {}});
    }
  }
  auto const          recs = gap_sweep(rnd);
  std::vector<double> ks, gaps;
  std::map<int, std::pair<double, int>> buckets;
  for (auto const &r : recs)
  {
    if (r.gap && r.k_true)
    {
      ks.push_back(*r.k_true);
      gaps.push_back(*r.gap);
      buckets[*r.k_true].first += *r.gap;
      buckets[*r.k_true].second += 1;
    }
  }
  auto const  corr = spearman(ks, gaps);
  bool        nondecreasing = true;
  double      prev = -1e300;
  std::string means;
  for (auto const &[k, sum] : buckets)
  {
    double const mean = sum.first / sum.second;
    nondecreasing     = nondecreasing && mean >= prev;
    prev              = mean;
    means += " k" + std::to_string(k) + "=" + fmt(mean);
  }
  bool const rnd_ok = gaps.size() >= 50 && corr.rho > 0 && corr.p_value < 0.05;
  report(ghz_ok && rnd_ok, "gap-direction",
         std::string("ghz quantum below classical at m=2 and gap(8) < gap(2): ") + (ghz_ok ? "yes" : "no") +
           "; random n=6 m=4 Spearman rho " + fmt(corr.rho) + ", p " + fmt(corr.p_value) + " over " +
           std::to_string(gaps.size()) + " models");
  note("bucket means:" + means + (nondecreasing ? " (nondecreasing)" : " (not strictly nondecreasing)") + "; " +
       fmt(seconds_since(t0)) + " s");
}

void chi_squared()
{
  double worst = 0.0;
  int    points = 0;
  for (double df : {1.0, 2.0, 3.0, 5.0, 10.0})
  {
    for (double x : {0.1, 1.0, 3.841, 12.0})
    {
      worst = std::max(worst, std::abs(chi2_cdf(x, df) - boost::math::gamma_p(df / 2, x / 2)));
      ++points;
    }
  }
  auto const lr = likelihood_ratio_test(-0.8, -0.8, 1000, 2);
  report(worst <= 1e-6 && lr.statistic == 0.0 && lr.p_value == 1.0, "chi-squared",
         "max |cdf - oracle| " + fmt(worst) + " over " + std::to_string(points) +
           " points (limit 1e-6); equal likelihoods give statistic " + fmt(lr.statistic) + ", p " + fmt(lr.p_value));
}

std::uint64_t binom(std::uint64_t n, std::uint64_t k)
{
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i)
  {
    r = r * (n - k + i) / i;
  }
  return r;
}

void coloring_complexity()
{
  bool        exact = true, marginal = true;
  std::size_t cases = 0;
  std::string growth;
  for (int n = 4; n <= 9; ++n)
  {
    std::uint64_t prev = 0;
    for (int s = 1; s <= 4; ++s)
    {
      auto const        m    = random_full(n, s, static_cast<std::uint64_t>(90'000 + n * 10 + s));
      std::size_t const rank = default_max_rank(m);
      auto const        g    = build_hypergraph(m, rank);
      std::uint64_t     want = 0;
      for (std::size_t i = 2; i <= rank; ++i)
      {
        want += binom(static_cast<std::uint64_t>(n), i);
      }
      exact = exact && g.subset_checks == want;
      ++cases;
      // the step from s - 1 to s adds the subsets of size s + 1
      if (s > 1 && rank == static_cast<std::size_t>(s) + 1)
      {
        std::uint64_t const step = g.subset_checks - prev;
        marginal = marginal && step == binom(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s) + 1) &&
                   step <= binom(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s)) *
                             static_cast<std::uint64_t>(n * s);
        if (n == 9)
        {
          growth += " s" + std::to_string(s) + ":+" + std::to_string(step);
        }
      }
      prev = g.subset_checks;
    }
  }
  report(exact && marginal, "coloring-complexity",
         std::string("counter equals the binomial sum on ") + std::to_string(cases) +
           " models; growth per unit s within C(n,s)*n*s: " + (marginal ? "yes" : "no") + " (n=9" + growth + ")");
}

}  // namespace

int main(int argc, char **argv)
{
  bool const strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  auto const t0     = Clock::now();
  exactness_and_overestimates();
  ghz_numbers();
  ghz_statevector();
  state_lower_bound();
  bounded_rank_edges();
  hmm_numerics();
  qhmm_numerics();
  gap_direction();
  chi_squared();
  coloring_complexity();
  std::cout << failures << " criteria failed, " << fmt(seconds_since(t0)) << " s" << std::endl;
  return strict && failures > 0 ? 1 : 0;
}
