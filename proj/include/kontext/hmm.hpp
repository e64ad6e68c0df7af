#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kontext/model.hpp"
#include "kontext/rng.hpp"
#include "kontext/sequence.hpp"

namespace kontext {

/// Input-conditioned HMM. In state l with input x it emits o with
/// probability emission(x)(l, o), then moves to l' with probability
/// transition(x, o)(l, l'). The chain starts in `initial_state`.
class Hmm
{
public:
  /// All rows uniform.
  Hmm(int states, int inputs, int outputs);

  /// Rows drawn from Dirichlet(1).
  static Hmm random(int states, int inputs, int outputs, Rng &rng);

  int states() const noexcept { return states_; }
  int inputs() const noexcept { return inputs_; }
  int outputs() const noexcept { return outputs_; }

  int  initial_state() const noexcept { return initial_; }
  void set_initial_state(int state);

  Eigen::MatrixXd       &emission(int x) { return emission_.at(static_cast<std::size_t>(x)); }
  Eigen::MatrixXd const &emission(int x) const { return emission_.at(static_cast<std::size_t>(x)); }

  Eigen::MatrixXd &transition(int x, int o)
  {
    return transition_.at(static_cast<std::size_t>(x * outputs_ + o));
  }
  Eigen::MatrixXd const &transition(int x, int o) const
  {
    return transition_.at(static_cast<std::size_t>(x * outputs_ + o));
  }

  /// Largest deviation of any row sum from one, or +inf on a negative entry.
  double normalization_error() const;

  /// Number of free real parameters.
  std::size_t free_parameters() const noexcept;

private:
  int                          states_;
  int                          inputs_;
  int                          outputs_;
  int                          initial_ = 0;
  std::vector<Eigen::MatrixXd> emission_;
  std::vector<Eigen::MatrixXd> transition_;
};

/// p(o | x) summed over latent paths by the forward recursion. Outputs equal
/// to kMaskedOutput are summed out. Throws DimensionMismatch when the
/// lengths differ or a token is out of range.
double hmm_prob(Hmm const &h, std::span<int const> x, std::span<int const> o);

/// Natural log of hmm_prob using per-step normalisation.
double hmm_log_prob(Hmm const &h, std::span<int const> x, std::span<int const> o);

/// Distribution of the latent state after reading `x` with every output
/// summed out.
Eigen::VectorXd latent_marginal(Hmm const &h, std::span<int const> x);

/// Model probability of one outcome of one context.
double context_prob(Hmm const &h, EncodedContext const &context, std::span<OutcomeId const> outcome);

struct TrainReport
{
  std::vector<double> log_likelihood;  // average per context, one per iteration
  double              kl          = 0.0;
  std::size_t         iterations  = 0;
  bool                converged   = false;
  std::uint64_t       seed        = 0;
};

struct BaumWelchOptions
{
  std::size_t        max_iters = 500;
  double             tol       = 1e-7;
  std::uint64_t      seed      = 0;
  /// Starting point; Dirichlet(1) rows from `seed` when absent.
  std::optional<Hmm> init;
};

/// EM on the uniform mixture over contexts of each context's outcome
/// distribution. The recorded log-likelihood is that of the parameters
/// entering each iteration, so the trace is nondecreasing. Throws
/// DegenerateInit when a row of the initial model is all zero.
std::pair<Hmm, TrainReport> baum_welch(EmpiricalModel const &model, int states, BaumWelchOptions const &options = {});

/// Best final KL over `restarts` runs with seeds seed, seed+1, ...
std::pair<Hmm, TrainReport> baum_welch_best(EmpiricalModel const  &model,
                                            int                    states,
                                            std::size_t            restarts,
                                            BaumWelchOptions const &options = {});

/// Average over contexts of sum_o e_C(o) log p(o | C), natural log.
double average_log_likelihood(EmpiricalModel const &model, Hmm const &h);

/// Mean over contexts of D(e_C || p_C); +inf when a supported outcome gets
/// probability zero.
double kl_divergence(EmpiricalModel const &target, Hmm const &h);

/// Mean over contexts of D(p_C || e_C); +inf when the model puts more than
/// `leak_tolerance` mass outside a context's support.
double kl_divergence_model_to_target(EmpiricalModel const &target, Hmm const &h, double leak_tolerance = 1e-12);

struct SupportEvent
{
  std::size_t context = 0;
  Outcome     outcome;
  double      target_p = 0.0;
  double      model_p  = 0.0;
};

/// Supported outcomes (e_C > 0) the model gives probability below `eps`.
std::vector<SupportEvent> support_violation(EmpiricalModel const &model, Hmm const &h, double eps);

/// Unsupported outcomes (e_C = 0) the model gives probability above `eps`,
/// found by a prefix search that skips branches of mass <= eps. At most
/// `max_reports` events are returned.
std::vector<SupportEvent> support_leaks(EmpiricalModel const &model,
                                        Hmm const            &h,
                                        double                eps,
                                        std::size_t           max_reports = 64);

/// Per context, model mass outside the context's support.
std::vector<double> leaked_mass(EmpiricalModel const &model, Hmm const &h);

}  // namespace kontext
