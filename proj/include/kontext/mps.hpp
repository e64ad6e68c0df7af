#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kontext/hmm.hpp"
#include "kontext/model.hpp"
#include "kontext/rng.hpp"
#include "kontext/sequence.hpp"

namespace kontext {

using Complex = std::complex<double>;

/// One site of the chain. The physical index is the pair (x, o) with
/// x < in_dim and o < out_dim; each pair owns a left x right block.
struct MpsSite
{
  int                           in_dim  = 1;
  int                           out_dim = 1;
  int                           left    = 1;
  int                           right   = 1;
  std::vector<Eigen::MatrixXcd> blocks;

  int phys_dim() const noexcept { return in_dim * out_dim; }

  Eigen::MatrixXcd       &block(int x, int o) { return blocks[static_cast<std::size_t>(x * out_dim + o)]; }
  Eigen::MatrixXcd const &block(int x, int o) const { return blocks[static_cast<std::size_t>(x * out_dim + o)]; }
};

/// Complex matrix-product Born machine over sites with joint (input, output)
/// physical indices. Boundary bonds have size one.
class MpsModel
{
public:
  MpsModel() = default;
  explicit MpsModel(std::vector<MpsSite> sites);

  /// Sites shaped for a sequence encoding: label steps carry no output, query
  /// steps carry |O| outputs, every site reads the full input alphabet.
  /// Throws DimensionMismatch when contexts differ in label or query length.
  static MpsModel zeros(SequenceEncoding const &encoding, int bond_dim);
  static MpsModel random(SequenceEncoding const &encoding, int bond_dim, Rng &rng);

  std::size_t length() const noexcept { return sites_.size(); }
  int         bond_dim() const noexcept;

  MpsSite       &site(std::size_t i) { return sites_.at(i); }
  MpsSite const &site(std::size_t i) const { return sites_.at(i); }

  /// Number of real parameters (two per complex entry).
  std::size_t real_parameters() const noexcept;

private:
  std::vector<MpsSite> sites_;
};

/// Amplitude of the joint token sequence, token = x * out_dim + o per site.
Complex amplitude(MpsModel const &mps, std::span<int const> tokens);

/// Sum over every joint token sequence of |amplitude|^2.
double norm_squared(MpsModel const &mps);

/// |amplitude|^2 / norm_squared. Throws DimensionMismatch on bad tokens.
double born_prob(MpsModel const &mps, std::span<int const> tokens);

/// p(suffix | prefix) over joint tokens, with the prefix marginal obtained by
/// contracting the remaining sites with their transfer operators. Throws
/// ZeroPrefix when the prefix marginal is below 1e-300.
double conditional_prob(MpsModel const &mps, std::span<int const> prefix, std::span<int const> suffix);

/// p(o | x): Born weight of (x, o) normalised over outputs at fixed inputs.
/// Masked outputs are summed out. Throws ZeroPrefix when every output of x has
/// weight below 1e-300.
double output_prob(MpsModel const &mps, std::span<int const> x, std::span<int const> o);

/// Rescales every site equally so that norm_squared becomes one.
void normalize(MpsModel &mps);

/// Average over contexts of -sum_o e_C(o) log p(o | C) and, when `gradient`
/// is given, its Wirtinger gradient d/dRe + i d/dIm per block.
double mps_loss(MpsModel const        &mps,
                EmpiricalModel const  &model,
                SequenceEncoding const &encoding,
                std::vector<MpsSite>  *gradient = nullptr,
                std::size_t            threads  = 1);

/// Mean over contexts of D(e_C || p_C).
double kl_divergence(EmpiricalModel const &target, MpsModel const &mps);

/// Average over contexts of sum_o e_C(o) log p(o | C).
double average_log_likelihood(EmpiricalModel const &model, MpsModel const &mps);

/// Embeds an HMM whose transitions are deterministic, with amplitudes
/// sqrt(q(o | l, x)) routed to the successor state. A label step must send
/// every output it can emit to the same successor. Throws InvalidModel when
/// the HMM does not qualify.
MpsModel embed_hmm(Hmm const &h, SequenceEncoding const &encoding);

struct QTrainReport
{
  std::vector<double> nll;
  std::vector<double> gradient_norm;
  double              kl   = 0.0;
  std::uint64_t       seed = 0;
};

struct QhmmOptions
{
  int           bond_dim = 2;
  std::size_t   steps    = 2000;
  double        lr       = 0.05;
  std::uint64_t seed     = 0;
  std::size_t   threads  = 1;
};

/// Plain gradient descent on the block entries with a global renormalisation
/// after each step. Returns the lowest-loss model seen. Throws Diverged when
/// the loss stops being finite.
std::pair<MpsModel, QTrainReport> train_qhmm(EmpiricalModel const &target, QhmmOptions const &options);

/// Best final KL over `restarts` runs with seeds seed, seed+1, ...
std::pair<MpsModel, QTrainReport> train_qhmm_best(EmpiricalModel const &target,
                                                  QhmmOptions const    &options,
                                                  std::size_t           restarts);

/// Binary form: "QMPS", u32 version, u32 length, per site u32 in_dim and
/// out_dim, length + 1 u32 bond dims, then every block entry in site, block,
/// row-major order as little-endian f64 real and imaginary parts.
std::string mps_to_bytes(MpsModel const &mps);
MpsModel    mps_from_bytes(std::string const &bytes);

}  // namespace kontext
