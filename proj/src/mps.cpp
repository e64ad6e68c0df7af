#include "kontext/mps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <string>

#include "kontext/error.hpp"
#include "kontext/parallel.hpp"

namespace kontext {

namespace {

double constexpr kTiny = 1e-300;

// Output index used for a sequence step at a site.
int output_at(MpsSite const &site, int o)
{
  return site.out_dim == 1 && o == kMaskedOutput ? 0 : o;
}

void check_joint(MpsModel const &mps, std::span<int const> tokens, std::size_t offset)
{
  for (std::size_t i = 0; i < tokens.size(); ++i)
  {
    auto const &site = mps.site(offset + i);
    if (tokens[i] < 0 || tokens[i] >= site.phys_dim())
    {
      throw DimensionMismatch("token " + std::to_string(tokens[i]) + " out of range at site " +
                              std::to_string(offset + i));
    }
  }
}

void check_io(MpsModel const &mps, std::span<int const> x, std::span<int const> o)
{
  if (x.size() != mps.length() || o.size() != mps.length())
  {
    throw DimensionMismatch("sequence length differs from the chain length " + std::to_string(mps.length()));
  }
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    auto const &site = mps.site(i);
    int const   out  = output_at(site, o[i]);
    if (x[i] < 0 || x[i] >= site.in_dim || (out != kMaskedOutput && (out < 0 || out >= site.out_dim)))
    {
      throw DimensionMismatch("token out of range at site " + std::to_string(i));
    }
  }
}

// rho' = sum over the allowed blocks of A^H rho A.
Eigen::MatrixXcd push_left(MpsSite const &site, Eigen::MatrixXcd const &rho, int x, int o)
{
  Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(site.right, site.right);
  for (int xi = 0; xi < site.in_dim; ++xi)
  {
    if (x != kMaskedOutput && xi != x)
    {
      continue;
    }
    for (int oi = 0; oi < site.out_dim; ++oi)
    {
      if (o != kMaskedOutput && oi != o)
      {
        continue;
      }
      auto const &a = site.block(xi, oi);
      next += a.adjoint() * rho * a;
    }
  }
  return next;
}

// sigma' = sum over the allowed blocks of A sigma A^H.
Eigen::MatrixXcd push_right(MpsSite const &site, Eigen::MatrixXcd const &sigma, int x, int o)
{
  Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(site.left, site.left);
  for (int oi = 0; oi < site.out_dim; ++oi)
  {
    if (o != kMaskedOutput && oi != o)
    {
      continue;
    }
    auto const &a = site.block(x, oi);
    next += a * sigma * a.adjoint();
  }
  return next;
}

Eigen::MatrixXcd unit()
{
  return Eigen::MatrixXcd::Ones(1, 1);
}

// Born weight summed over masked outputs at fixed inputs.
double weight(MpsModel const &mps, std::span<int const> x, std::span<int const> o)
{
  Eigen::MatrixXcd rho = unit();
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    rho = push_left(mps.site(i), rho, x[i], output_at(mps.site(i), o[i]));
  }
  return rho(0, 0).real();
}

std::vector<MpsSite> zero_like(MpsModel const &mps)
{
  std::vector<MpsSite> out;
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    MpsSite site = mps.site(i);
    for (auto &b : site.blocks)
    {
      b.setZero();
    }
    out.push_back(std::move(site));
  }
  return out;
}

// Loss of one context and its gradient contribution.
double context_loss(MpsModel const        &mps,
                    EncodedContext const  &ctx,
                    ContextDistribution const &dist,
                    std::vector<MpsSite>  *grad)
{
  std::size_t const L = mps.length();
  std::vector<int>  masked(L, kMaskedOutput);

  std::vector<Eigen::MatrixXcd> rho(L + 1), sigma(L + 1);
  rho[0] = unit();
  for (std::size_t i = 0; i < L; ++i)
  {
    rho[i + 1] = push_left(mps.site(i), rho[i], ctx.inputs[i], kMaskedOutput);
  }
  sigma[L] = unit();
  for (std::size_t i = L; i-- > 0;)
  {
    sigma[i] = push_right(mps.site(i), sigma[i + 1], ctx.inputs[i], kMaskedOutput);
  }
  double const norm = rho[L](0, 0).real();
  if (!(norm > kTiny))
  {
    return std::numeric_limits<double>::infinity();
  }

  double loss = std::log(norm);
  if (grad)
  {
    for (std::size_t i = 0; i < L; ++i)
    {
      auto &g = (*grad)[i];
      for (int o = 0; o < g.out_dim; ++o)
      {
        g.block(ctx.inputs[i], o) += (2.0 / norm) * (rho[i] * mps.site(i).block(ctx.inputs[i], o) * sigma[i + 1]);
      }
    }
  }

  std::vector<Eigen::RowVectorXcd> left(L + 1);
  std::vector<Eigen::VectorXcd>    right(L + 1);
  for (auto const &entry : dist.entries)
  {
    auto const outputs = ctx.outputs_for(entry.outcome);
    left[0]            = Eigen::RowVectorXcd::Ones(1);
    for (std::size_t i = 0; i < L; ++i)
    {
      left[i + 1] = left[i] * mps.site(i).block(ctx.inputs[i], output_at(mps.site(i), outputs[i]));
    }
    Complex const amp = left[L](0);
    double const  w   = std::norm(amp);
    if (!(w > kTiny))
    {
      return std::numeric_limits<double>::infinity();
    }
    loss -= entry.p * std::log(w);
    if (grad)
    {
      right[L] = Eigen::VectorXcd::Ones(1);
      for (std::size_t i = L; i-- > 0;)
      {
        right[i] = mps.site(i).block(ctx.inputs[i], output_at(mps.site(i), outputs[i])) * right[i + 1];
      }
      Complex const scale = -entry.p * 2.0 * amp / w;
      for (std::size_t i = 0; i < L; ++i)
      {
        (*grad)[i].block(ctx.inputs[i], output_at(mps.site(i), outputs[i])) +=
          scale * (left[i].adjoint() * right[i + 1].adjoint());
      }
    }
  }
  return loss;
}

void put_u32(std::string &out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
  {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
}

void put_f64(std::string &out, double v)
{
  auto const bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
  {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
  }
}

class Reader
{
public:
  Reader(std::string const &bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::uint64_t take(int width)
  {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
    {
      throw ParseError("truncated MPS file", 0);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
    {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }

  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double        f64() { return std::bit_cast<double>(take(8)); }
  bool          done() const { return pos_ == bytes_.size(); }

private:
  std::string const &bytes_;
  std::size_t        pos_;
};

}  // namespace

MpsModel::MpsModel(std::vector<MpsSite> sites) : sites_(std::move(sites))
{
  for (std::size_t i = 0; i < sites_.size(); ++i)
  {
    auto const &s = sites_[i];
    if (s.in_dim < 1 || s.out_dim < 1 || s.left < 1 || s.right < 1 ||
        s.blocks.size() != static_cast<std::size_t>(s.phys_dim()))
    {
      throw DimensionMismatch("malformed site " + std::to_string(i));
    }
    for (auto const &b : s.blocks)
    {
      if (b.rows() != s.left || b.cols() != s.right)
      {
        throw DimensionMismatch("block shape differs from bond dims at site " + std::to_string(i));
      }
    }
    if ((i == 0 && s.left != 1) || (i + 1 == sites_.size() && s.right != 1) ||
        (i > 0 && sites_[i - 1].right != s.left))
    {
      throw DimensionMismatch("bond dims do not chain at site " + std::to_string(i));
    }
  }
}

MpsModel MpsModel::zeros(SequenceEncoding const &encoding, int bond_dim)
{
  if (bond_dim < 1)
  {
    throw InvalidModel("bond dimension must be positive");
  }
  if (encoding.contexts.empty())
  {
    throw EmptyModel("no contexts to lay out");
  }
  std::size_t const label = encoding.contexts.front().label_length;
  std::size_t const len   = encoding.contexts.front().length();
  for (auto const &ctx : encoding.contexts)
  {
    if (ctx.label_length != label || ctx.length() != len)
    {
      throw DimensionMismatch("contexts differ in label or query length");
    }
  }
  std::vector<MpsSite> sites(len);
  for (std::size_t i = 0; i < len; ++i)
  {
    auto &s   = sites[i];
    s.in_dim  = encoding.input_alphabet;
    s.out_dim = i < label ? 1 : encoding.num_outcomes;
    s.left    = i == 0 ? 1 : bond_dim;
    s.right   = i + 1 == len ? 1 : bond_dim;
    s.blocks.assign(static_cast<std::size_t>(s.phys_dim()), Eigen::MatrixXcd::Zero(s.left, s.right));
  }
  return MpsModel(std::move(sites));
}

MpsModel MpsModel::random(SequenceEncoding const &encoding, int bond_dim, Rng &rng)
{
  MpsModel mps = zeros(encoding, bond_dim);
  for (auto &s : mps.sites_)
  {
    for (auto &b : s.blocks)
    {
      for (Eigen::Index r = 0; r < b.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < b.cols(); ++c)
        {
          double const re = rng.normal();
          b(r, c)         = Complex(re, rng.normal());
        }
      }
    }
  }
  normalize(mps);
  return mps;
}

int MpsModel::bond_dim() const noexcept
{
  int d = 1;
  for (auto const &s : sites_)
  {
    d = std::max(d, s.right);
  }
  return d;
}

std::size_t MpsModel::real_parameters() const noexcept
{
  std::size_t n = 0;
  for (auto const &s : sites_)
  {
    n += 2 * static_cast<std::size_t>(s.phys_dim() * s.left * s.right);
  }
  return n;
}

Complex amplitude(MpsModel const &mps, std::span<int const> tokens)
{
  if (tokens.size() != mps.length())
  {
    throw DimensionMismatch("sequence length differs from the chain length " + std::to_string(mps.length()));
  }
  check_joint(mps, tokens, 0);
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (std::size_t i = 0; i < tokens.size(); ++i)
  {
    v = v * mps.site(i).blocks[static_cast<std::size_t>(tokens[i])];
  }
  return v(0);
}

double norm_squared(MpsModel const &mps)
{
  Eigen::MatrixXcd rho = unit();
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    rho = push_left(mps.site(i), rho, kMaskedOutput, kMaskedOutput);
  }
  return rho(0, 0).real();
}

double born_prob(MpsModel const &mps, std::span<int const> tokens)
{
  return std::norm(amplitude(mps, tokens)) / norm_squared(mps);
}

double conditional_prob(MpsModel const &mps, std::span<int const> prefix, std::span<int const> suffix)
{
  if (prefix.size() + suffix.size() != mps.length())
  {
    throw DimensionMismatch("prefix and suffix do not span the chain");
  }
  check_joint(mps, prefix, 0);
  check_joint(mps, suffix, prefix.size());
  Eigen::MatrixXcd rho = unit();
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    auto const &site = mps.site(i);
    if (i < prefix.size())
    {
      auto const &a = site.blocks[static_cast<std::size_t>(prefix[i])];
      rho           = a.adjoint() * rho * a;
    }
    else
    {
      rho = push_left(site, rho, kMaskedOutput, kMaskedOutput);
    }
  }
  double const marginal = rho(0, 0).real();
  if (marginal / norm_squared(mps) < kTiny)
  {
    throw ZeroPrefix("prefix has zero probability");
  }
  std::vector<int> tokens(prefix.begin(), prefix.end());
  tokens.insert(tokens.end(), suffix.begin(), suffix.end());
  return std::norm(amplitude(mps, tokens)) / marginal;
}

double output_prob(MpsModel const &mps, std::span<int const> x, std::span<int const> o)
{
  check_io(mps, x, o);
  std::vector<int> masked(x.size(), kMaskedOutput);
  double const     total = weight(mps, x, masked);
  if (!(total > kTiny))
  {
    throw ZeroPrefix("inputs have zero weight");
  }
  return weight(mps, x, o) / total;
}

void normalize(MpsModel &mps)
{
  double const z = norm_squared(mps);
  if (!(z > 0.0) || !std::isfinite(z) || mps.length() == 0)
  {
    throw Diverged("cannot normalise a chain with norm " + std::to_string(z));
  }
  double const scale = std::pow(z, -0.5 / static_cast<double>(mps.length()));
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    for (auto &b : mps.site(i).blocks)
    {
      b *= scale;
    }
  }
}

double mps_loss(MpsModel const        &mps,
                EmpiricalModel const  &model,
                SequenceEncoding const &encoding,
                std::vector<MpsSite>  *gradient,
                std::size_t            threads)
{
  std::size_t const                 n = model.num_contexts();
  std::vector<double>               losses(n);
  std::vector<std::vector<MpsSite>> grads;
  if (gradient)
  {
    grads.assign(n, zero_like(mps));
  }
  parallel_for(n, threads, [&](std::size_t c, std::size_t) {
    losses[c] = context_loss(mps, encoding.contexts[c], model.distribution(c), gradient ? &grads[c] : nullptr);
  });

  double total = 0.0;
  for (double l : losses)
  {
    total += l;
  }
  double const inv = 1.0 / static_cast<double>(n);
  if (gradient)
  {
    *gradient = zero_like(mps);
    for (std::size_t c = 0; c < n; ++c)
    {
      for (std::size_t i = 0; i < mps.length(); ++i)
      {
        for (std::size_t b = 0; b < (*gradient)[i].blocks.size(); ++b)
        {
          (*gradient)[i].blocks[b] += inv * grads[c][i].blocks[b];
        }
      }
    }
  }
  return total * inv;
}

double kl_divergence(EmpiricalModel const &target, MpsModel const &mps)
{
  auto const enc   = encode_sequences(target);
  double     total = 0.0;
  for (std::size_t c = 0; c < target.num_contexts(); ++c)
  {
    auto const &ctx = enc.contexts[c];
    for (auto const &entry : target.distribution(c).entries)
    {
      double const q = output_prob(mps, ctx.inputs, ctx.outputs_for(entry.outcome));
      total += q > 0.0 ? entry.p * std::log(entry.p / q) : std::numeric_limits<double>::infinity();
    }
  }
  return total / static_cast<double>(target.num_contexts());
}

double average_log_likelihood(EmpiricalModel const &model, MpsModel const &mps)
{
  auto const enc   = encode_sequences(model);
  double     total = 0.0;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    auto const &ctx = enc.contexts[c];
    for (auto const &entry : model.distribution(c).entries)
    {
      total += entry.p * std::log(output_prob(mps, ctx.inputs, ctx.outputs_for(entry.outcome)));
    }
  }
  return total / static_cast<double>(model.num_contexts());
}

MpsModel embed_hmm(Hmm const &h, SequenceEncoding const &encoding)
{
  if (h.inputs() != encoding.input_alphabet || h.outputs() != encoding.num_outcomes)
  {
    throw DimensionMismatch("HMM alphabets differ from the sequence encoding");
  }
  MpsModel     mps = MpsModel::zeros(encoding, h.states());
  int const    m   = h.states();
  double const tol = 1e-12;

  auto successor = [&](int x, int o, int state) {
    auto const row = h.transition(x, o).row(state);
    for (int next = 0; next < m; ++next)
    {
      if (std::abs(row(next) - 1.0) <= tol)
      {
        return next;
      }
    }
    throw InvalidModel("transition from state " + std::to_string(state) + " is not deterministic");
  };

  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    auto      &site = mps.site(i);
    bool const last = i + 1 == mps.length();
    for (int x = 0; x < site.in_dim; ++x)
    {
      for (int row = 0; row < site.left; ++row)
      {
        int const state = i == 0 ? h.initial_state() : row;
        if (site.out_dim == 1)
        {
          int target = -1;
          for (int o = 0; o < h.outputs(); ++o)
          {
            if (h.emission(x)(state, o) <= 0.0)
            {
              continue;
            }
            int const next = successor(x, o, state);
            if (target >= 0 && next != target)
            {
              throw InvalidModel("label step branches on its hidden output");
            }
            target = next;
          }
          site.block(x, 0)(row, last ? 0 : target) = 1.0;
          continue;
        }
        for (int o = 0; o < site.out_dim; ++o)
        {
          double const q = h.emission(x)(state, o);
          if (q <= 0.0)
          {
            continue;
          }
          site.block(x, o)(row, last ? 0 : successor(x, o, state)) = std::sqrt(q);
        }
      }
    }
  }
  return mps;
}

std::pair<MpsModel, QTrainReport> train_qhmm(EmpiricalModel const &target, QhmmOptions const &options)
{
  auto const enc = encode_sequences(target);
  Rng        rng(options.seed);
  MpsModel   mps = MpsModel::random(enc, options.bond_dim, rng);

  QTrainReport report;
  report.seed      = options.seed;
  MpsModel best    = mps;
  double   best_nll = std::numeric_limits<double>::infinity();
  std::vector<MpsSite> grad;
  for (std::size_t step = 0; step < options.steps; ++step)
  {
    double const nll = mps_loss(mps, target, enc, &grad, options.threads);
    if (!std::isfinite(nll))
    {
      throw Diverged("loss became non-finite at step " + std::to_string(step));
    }
    report.nll.push_back(nll);
    if (nll < best_nll)
    {
      best_nll = nll;
      best     = mps;
    }
    double g2 = 0.0;
    for (std::size_t i = 0; i < mps.length(); ++i)
    {
      for (std::size_t b = 0; b < grad[i].blocks.size(); ++b)
      {
        g2 += grad[i].blocks[b].squaredNorm();
        mps.site(i).blocks[b] -= options.lr * grad[i].blocks[b];
      }
    }
    report.gradient_norm.push_back(std::sqrt(g2));
    normalize(mps);
  }
  double const final_nll = mps_loss(mps, target, enc, nullptr, options.threads);
  if (std::isfinite(final_nll) && final_nll < best_nll)
  {
    best = mps;
  }
  report.kl = kl_divergence(target, best);
  return {std::move(best), std::move(report)};
}

std::pair<MpsModel, QTrainReport> train_qhmm_best(EmpiricalModel const &target,
                                                  QhmmOptions const    &options,
                                                  std::size_t           restarts)
{
  std::optional<std::pair<MpsModel, QTrainReport>> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r)
  {
    QhmmOptions run = options;
    run.seed        = options.seed + r;
    auto result     = train_qhmm(target, run);
    if (!best || result.second.kl < best->second.kl)
    {
      best = std::move(result);
    }
  }
  return std::move(*best);
}

std::string mps_to_bytes(MpsModel const &mps)
{
  std::string out = "QMPS";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(mps.length()));
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    put_u32(out, static_cast<std::uint32_t>(mps.site(i).in_dim));
    put_u32(out, static_cast<std::uint32_t>(mps.site(i).out_dim));
  }
  put_u32(out, 1);
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    put_u32(out, static_cast<std::uint32_t>(mps.site(i).right));
  }
  for (std::size_t i = 0; i < mps.length(); ++i)
  {
    for (auto const &b : mps.site(i).blocks)
    {
      for (Eigen::Index r = 0; r < b.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < b.cols(); ++c)
        {
          put_f64(out, b(r, c).real());
          put_f64(out, b(r, c).imag());
        }
      }
    }
  }
  return out;
}

MpsModel mps_from_bytes(std::string const &bytes)
{
  if (bytes.size() < 4 || bytes.compare(0, 4, "QMPS") != 0)
  {
    throw ParseError("missing QMPS magic", 0);
  }
  Reader in(bytes, 4);
  std::uint32_t const version = in.u32();
  if (version != 1)
  {
    throw ParseError("unsupported QMPS version " + std::to_string(version), 0);
  }
  std::uint32_t const  len = in.u32();
  std::vector<MpsSite> sites(len);
  for (auto &s : sites)
  {
    s.in_dim  = static_cast<int>(in.u32());
    s.out_dim = static_cast<int>(in.u32());
  }
  std::vector<int> bonds(len + 1);
  for (auto &b : bonds)
  {
    b = static_cast<int>(in.u32());
  }
  for (std::size_t i = 0; i < len; ++i)
  {
    auto &s = sites[i];
    s.left  = bonds[i];
    s.right = bonds[i + 1];
    s.blocks.assign(static_cast<std::size_t>(s.phys_dim()), Eigen::MatrixXcd(s.left, s.right));
    for (auto &b : s.blocks)
    {
      for (Eigen::Index r = 0; r < b.rows(); ++r)
      {
        for (Eigen::Index c = 0; c < b.cols(); ++c)
        {
          double const re = in.f64();
          b(r, c)         = Complex(re, in.f64());
        }
      }
    }
  }
  if (!in.done())
  {
    throw ParseError("trailing bytes after MPS data", 0);
  }
  return MpsModel(std::move(sites));
}

}  // namespace kontext
