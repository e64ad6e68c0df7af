#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "kontext/error.hpp"
#include "kontext/generators.hpp"
#include "kontext/hmm.hpp"
#include "kontext/hmm_io.hpp"
#include "kontext/sequence.hpp"

using namespace kontext;

namespace {

// Sum over every latent path of the product of emission and transition
// weights; masked outputs also sum over their value.
double paths_oracle(Hmm const &h, std::vector<int> const &x, std::vector<int> const &o)
{
  std::size_t const                         len = x.size();
  std::function<double(std::size_t, int)> rec = [&](std::size_t t, int state) -> double {
    if (t == len)
    {
      return 1.0;
    }
    double total = 0.0;
    for (int out = 0; out < h.outputs(); ++out)
    {
      if (o[t] != kMaskedOutput && o[t] != out)
      {
        continue;
      }
      double const e = h.emission(x[t])(state, out);
      for (int next = 0; next < h.states(); ++next)
      {
        total += e * h.transition(x[t], out)(state, next) * rec(t + 1, next);
      }
    }
    return total;
  };
  return rec(0, h.initial_state());
}

}  // namespace

TEST(Forward, MatchesPathEnumeration)
{
  Rng rng(1);
  for (int states = 1; states <= 4; ++states)
  {
    for (int len = 1; len <= 5; ++len)
    {
      Hmm h = Hmm::random(states, 3, 2, rng);
      h.set_initial_state(states - 1);
      for (int trial = 0; trial < 10; ++trial)
      {
        std::vector<int> x(static_cast<std::size_t>(len)), o(static_cast<std::size_t>(len));
        for (int t = 0; t < len; ++t)
        {
          x[static_cast<std::size_t>(t)] = static_cast<int>(rng.below(3));
          o[static_cast<std::size_t>(t)] = rng.below(4) == 0 ? kMaskedOutput : static_cast<int>(rng.below(2));
        }
        double const ref = paths_oracle(h, x, o);
        EXPECT_LE(std::abs(hmm_prob(h, x, o) - ref), 1e-10 * ref);
        EXPECT_LE(std::abs(std::exp(hmm_log_prob(h, x, o)) - ref), 1e-10 * ref);
      }
    }
  }
  Hmm const h(2, 2, 2);
  std::vector<int> const x{0, 1}, short_o{0}, bad{0, 5};
  EXPECT_THROW(hmm_prob(h, x, short_o), DimensionMismatch);
  EXPECT_THROW(hmm_prob(h, x, bad), DimensionMismatch);
}

TEST(Forward, OutputsSumToOne)
{
  Rng rng(2);
  Hmm const h = Hmm::random(3, 2, 3, rng);
  std::vector<int> const x{0, 1, 1};
  double total = 0.0;
  for (int a = 0; a < 3; ++a)
  {
    for (int b = 0; b < 3; ++b)
    {
      for (int c = 0; c < 3; ++c)
      {
        total += hmm_prob(h, x, std::vector<int>{a, b, c});
      }
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(hmm_prob(h, x, std::vector<int>{kMaskedOutput, kMaskedOutput, kMaskedOutput}), 1.0, 1e-12);
}

TEST(Forward, LatentMarginalMatchesBruteForce)
{
  Rng rng(3);
  Hmm const        h = Hmm::random(3, 2, 2, rng);
  std::vector<int> x{1, 0, 1};
  Eigen::VectorXd  ref = Eigen::VectorXd::Zero(3);
  // enumerate states and outputs along the path
  std::function<void(std::size_t, int, double)> rec = [&](std::size_t t, int state, double w) {
    if (t == x.size())
    {
      ref(state) += w;
      return;
    }
    for (int o = 0; o < 2; ++o)
    {
      for (int next = 0; next < 3; ++next)
      {
        rec(t + 1, next, w * h.emission(x[t])(state, o) * h.transition(x[t], o)(state, next));
      }
    }
  };
  rec(0, 0, 1.0);
  EXPECT_LE((latent_marginal(h, x) - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(ref.sum(), 1.0, 1e-12);
}

TEST(BaumWelch, LogLikelihoodNeverDecreases)
{
  for (std::uint64_t run = 0; run < 50; ++run)
  {
    RandomModelSpec spec;
    spec.n        = 3 + static_cast<int>(run % 3);
    spec.sparsity = 1 + static_cast<int>(run % 3);
    spec.seed     = run;
    auto const       m = run % 5 == 0 ? ghz_model(3) : random_model(spec);
    BaumWelchOptions opts;
    opts.seed      = run;
    opts.max_iters = 60;
    auto const [h, report] = baum_welch(m, 1 + static_cast<int>(run % 4), opts);
    for (std::size_t i = 1; i < report.log_likelihood.size(); ++i)
    {
      ASSERT_GE(report.log_likelihood[i], report.log_likelihood[i - 1] - 1e-9) << "run " << run;
    }
    EXPECT_LE(h.normalization_error(), 1e-9);
    EXPECT_NEAR(report.log_likelihood.back(), average_log_likelihood(m, h), 1e-6);
  }
}

TEST(BaumWelch, RecoversItsOwnDistribution)
{
  // a noncontextual target is reachable by enough states
  auto const m = noncontextual_model(3, 2, 4);
  auto const [h, report] = baum_welch_best(m, 4, 3);
  EXPECT_LT(report.kl, 0.05);
  EXPECT_TRUE(std::isfinite(kl_divergence(m, h)));

  Hmm zero(2, encode_sequences(m).input_alphabet, m.num_outcomes());
  zero.emission(0).setZero();
  BaumWelchOptions o;
  o.init = zero;
  EXPECT_THROW(baum_welch(m, 2, o), DegenerateInit);
}

TEST(Support, SingleStateOnGhzLeaks)
{
  auto const m = ghz_model(3);
  auto const [h, report] = baum_welch(m, 1);
  // one state cannot correlate: uniform outputs everywhere
  EXPECT_TRUE(std::isfinite(report.kl));
  auto const leaks = leaked_mass(m, h);
  for (std::size_t c = 0; c < m.num_contexts(); ++c)
  {
    bool const odd = __builtin_popcount(static_cast<unsigned>(m.context(c).id)) % 2 == 1;
    EXPECT_NEAR(leaks[c], odd ? 0.0 : 0.5, 1e-6);
  }
  EXPECT_TRUE(std::isinf(kl_divergence_model_to_target(m, h)));
  EXPECT_TRUE(support_violation(m, h, 0.0).empty());
  EXPECT_FALSE(support_violation(m, h, 0.2).empty());
  auto const events = support_leaks(m, h, 0.1, 3);
  EXPECT_EQ(events.size(), 3u);
  for (auto const &e : events)
  {
    EXPECT_EQ(e.target_p, 0.0);
    EXPECT_GT(e.model_p, 0.1);
  }
}

TEST(Kl, InfiniteWhenSupportMissed)
{
  auto const m = ghz_model(2);
  auto const enc = encode_sequences(m);
  Hmm        h(1, enc.input_alphabet, 2);
  for (int x = 0; x < h.inputs(); ++x)
  {
    h.emission(x) << 1.0, 0.0;
  }
  EXPECT_TRUE(std::isinf(kl_divergence(m, h)));
  EXPECT_FALSE(support_violation(m, h, 0.0).empty());
}

TEST(HmmIo, RoundTrip)
{
  Rng       rng(9);
  Hmm       h = Hmm::random(3, 4, 2, rng);
  h.set_initial_state(2);
  auto const text = hmm_to_json(h);
  Hmm const  back = hmm_from_json(text);
  EXPECT_EQ(hmm_to_json(back), text);
  EXPECT_EQ(back.initial_state(), 2);
  EXPECT_THROW(hmm_from_json("{}"), ParseError);
  EXPECT_EQ(Hmm(2, 3, 4).free_parameters(), std::size_t(2 * 3 * 3 + 2 * 3 * 4 * 1));
}
