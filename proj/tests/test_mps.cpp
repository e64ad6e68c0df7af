#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "kontext/error.hpp"
#include "kontext/generators.hpp"
#include "kontext/hmm.hpp"
#include "kontext/mps.hpp"

using namespace kontext;

namespace {

MpsModel random_chain(std::vector<int> const &bonds, int in_dim, int out_dim, Rng &rng)
{
  std::vector<MpsSite> sites;
  for (std::size_t i = 0; i + 1 < bonds.size(); ++i)
  {
    MpsSite s;
    s.in_dim  = in_dim;
    s.out_dim = out_dim;
    s.left    = bonds[i];
    s.right   = bonds[i + 1];
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

// Amplitude as an explicit sum over every bond-index path.
Complex amplitude_oracle(MpsModel const &mps, std::vector<int> const &tokens)
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

void for_each_sequence(std::vector<int> const &radix, std::function<void(std::vector<int> const &)> const &f)
{
  std::vector<int> t(radix.size(), 0);
  while (true)
  {
    f(t);
    std::size_t i = 0;
    while (i < t.size() && ++t[i] == radix[i])
    {
      t[i] = 0;
      ++i;
    }
    if (i == t.size())
    {
      return;
    }
  }
}

}  // namespace

TEST(Mps, AmplitudesMatchDenseOracle)
{
  Rng        rng(4);
  auto const mps = random_chain({1, 2, 3, 2, 1}, 2, 2, rng);
  std::vector<int> radix(4, 4);
  double     norm = 0.0;
  for_each_sequence(radix, [&](auto const &t) {
    Complex const ref = amplitude_oracle(mps, t);
    Complex const got = amplitude(mps, t);
    EXPECT_LE(std::abs(got - ref), 1e-10 * std::abs(ref) + 1e-300);
    norm += std::norm(ref);
  });
  EXPECT_LE(std::abs(norm_squared(mps) - norm), 1e-10 * norm);
  for_each_sequence(radix, [&](auto const &t) {
    double const ref = std::norm(amplitude_oracle(mps, t)) / norm;
    EXPECT_LE(std::abs(born_prob(mps, t) - ref), 1e-10 * ref);
  });
}

TEST(Mps, NormalizationIsExhaustive)
{
  Rng  rng(5);
  // 4 sites over 4 joint tokens: 4^4 sequences
  auto mps = random_chain({1, 3, 3, 3, 1}, 2, 2, rng);
  normalize(mps);
  EXPECT_NEAR(norm_squared(mps), 1.0, 1e-12);
  double total = 0.0, born = 0.0;
  for_each_sequence(std::vector<int>(4, 4), [&](auto const &t) {
    total += std::norm(amplitude(mps, t));
    born += born_prob(mps, t);
  });
  EXPECT_NEAR(total, 1.0, 1e-8);
  EXPECT_NEAR(born, 1.0, 1e-8);
  // conditional outputs sum to one for every input sequence
  for_each_sequence(std::vector<int>(4, 2), [&](auto const &x) {
    double sum = 0.0;
    for_each_sequence(std::vector<int>(4, 2), [&](auto const &o) { sum += output_prob(mps, x, o); });
    EXPECT_NEAR(sum, 1.0, 1e-8);
  });
}

TEST(Mps, ConditionalMatchesRatioOfMarginals)
{
  Rng        rng(6);
  auto const mps = random_chain({1, 2, 2, 2, 1}, 1, 3, rng);
  std::vector<int> const prefix{2, 0};
  double                 joint_prefix = 0.0;
  for_each_sequence({3, 3}, [&](auto const &rest) {
    joint_prefix += born_prob(mps, std::vector<int>{2, 0, rest[0], rest[1]});
  });
  for_each_sequence({3, 3}, [&](auto const &suffix) {
    double const ref = born_prob(mps, std::vector<int>{2, 0, suffix[0], suffix[1]}) / joint_prefix;
    EXPECT_LE(std::abs(conditional_prob(mps, prefix, suffix) - ref), 1e-10 * ref);
  });
}

TEST(Mps, GradientMatchesFiniteDifferences)
{
  RandomModelSpec spec;
  spec.n        = 3;
  spec.sparsity = 2;
  spec.seed     = 1;
  auto const m   = random_model(spec);
  auto const enc = encode_sequences(m);
  Rng        rng(7);
  auto       mps = MpsModel::random(enc, 2, rng);

  std::vector<MpsSite> grad;
  mps_loss(mps, m, enc, &grad);
  double const h        = 1e-6;
  double       diff_sq  = 0.0;
  double       norm_sq  = 0.0;
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    for (std::size_t b = 0; b < mps.site(i).blocks.size(); ++b)
    {
      auto &block = mps.site(i).blocks[b];
      for (Eigen::Index r = 0; r < block.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < block.cols(); ++c)
        {
          for (Complex dir : {Complex(1, 0), Complex(0, 1)})
          {
            Complex const saved = block(r, c);
            block(r, c)         = saved + h * dir;
            double const up     = mps_loss(mps, m, enc);
            block(r, c)         = saved - h * dir;
            double const down   = mps_loss(mps, m, enc);
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
  EXPECT_LE(std::sqrt(diff_sq / norm_sq), 1e-4);
}

TEST(Mps, EmbeddedDeterministicHmmIsExact)
{
  auto const m   = ghz_model(3);
  auto const enc = encode_sequences(m);
  Rng        rng(8);
  for (int states = 1; states <= 3; ++states)
  {
    Hmm h = Hmm::random(states, enc.input_alphabet, 2, rng);
    for (int x = 0; x < h.inputs(); ++x)
    {
      for (int o = 0; o < 2; ++o)
      {
        auto &t = h.transition(x, o);
        t.setZero();
        for (int l = 0; l < states; ++l)
        {
          t(l, static_cast<int>(rng.below(static_cast<std::uint64_t>(states)))) = 1.0;
        }
      }
    }
    auto const mps = embed_hmm(h, enc);
    for (std::size_t c = 0; c < m.num_contexts(); ++c)
    {
      auto const &ctx = enc.contexts[c];
      for_each_sequence(std::vector<int>(3, 2), [&](auto const &out) {
        double const p = context_prob(h, ctx, out);
        EXPECT_NEAR(output_prob(mps, ctx.inputs, ctx.outputs_for(out)), p, 1e-9);
      });
    }
  }
  Hmm mixing(2, enc.input_alphabet, 2);
  EXPECT_THROW(embed_hmm(mixing, enc), InvalidModel);
}

TEST(Mps, BinaryRoundTrip)
{
  Rng        rng(9);
  auto const mps   = random_chain({1, 2, 3, 1}, 3, 2, rng);
  auto const bytes = mps_to_bytes(mps);
  EXPECT_EQ(bytes.substr(0, 4), "QMPS");
  auto const back = mps_from_bytes(bytes);
  EXPECT_EQ(mps_to_bytes(back), bytes);
  EXPECT_THROW(mps_from_bytes("QMPX"), ParseError);
  EXPECT_THROW(mps_from_bytes(bytes.substr(0, bytes.size() - 3)), ParseError);
}

TEST(Qhmm, TrainingLowersLossAndStaysNormalised)
{
  auto const  m = ghz_model(3);
  QhmmOptions o;
  o.bond_dim = 2;
  o.steps    = 200;
  auto const [mps, report] = train_qhmm(m, o);
  ASSERT_FALSE(report.nll.empty());
  for (double v : report.nll)
  {
    EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_LT(*std::min_element(report.nll.begin(), report.nll.end()), report.nll.front());
  EXPECT_NEAR(norm_squared(mps), 1.0, 1e-8);
  EXPECT_LE(mps.bond_dim(), 2);
  EXPECT_NEAR(report.kl, kl_divergence(m, mps), 1e-9);
}
