#include "kontext/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kontext/error.hpp"

namespace kontext {

namespace {

double constexpr kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd dirichlet_row(int size, Rng &rng)
{
  Eigen::VectorXd row(size);
  for (int i = 0; i < size; ++i)
  {
    row(i) = rng.exponential();
  }
  return row / row.sum();
}

void check_sequence(Hmm const &h, std::span<int const> x, std::span<int const> o)
{
  if (x.size() != o.size())
  {
    throw DimensionMismatch("input length " + std::to_string(x.size()) + " differs from output length " +
                            std::to_string(o.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    if (x[i] < 0 || x[i] >= h.inputs())
    {
      throw DimensionMismatch("input token " + std::to_string(x[i]) + " out of range");
    }
    if (o[i] != kMaskedOutput && (o[i] < 0 || o[i] >= h.outputs()))
    {
      throw DimensionMismatch("output token " + std::to_string(o[i]) + " out of range");
    }
  }
}

// Row vector a * diag(q(o | ., x)) * T(x, o), summed over o when masked.
Eigen::RowVectorXd advance(Hmm const &h, Eigen::RowVectorXd const &a, int x, int o)
{
  if (o != kMaskedOutput)
  {
    return a.cwiseProduct(h.emission(x).col(o).transpose()) * h.transition(x, o);
  }
  Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(h.states());
  for (int out = 0; out < h.outputs(); ++out)
  {
    next += a.cwiseProduct(h.emission(x).col(out).transpose()) * h.transition(x, out);
  }
  return next;
}

// Mass of the final step's emission.
double finish(Hmm const &h, Eigen::RowVectorXd const &a, int x, int o)
{
  if (o == kMaskedOutput)
  {
    return a.sum();
  }
  return a.dot(h.emission(x).col(o).transpose());
}

Eigen::RowVectorXd start(Hmm const &h)
{
  Eigen::RowVectorXd a           = Eigen::RowVectorXd::Zero(h.states());
  a(h.initial_state()) = 1.0;
  return a;
}

struct Counts
{
  std::vector<Eigen::MatrixXd> emission;
  std::vector<Eigen::MatrixXd> transition;

  explicit Counts(Hmm const &h)
  {
    emission.assign(static_cast<std::size_t>(h.inputs()), Eigen::MatrixXd::Zero(h.states(), h.outputs()));
    transition.assign(static_cast<std::size_t>(h.inputs() * h.outputs()),
                      Eigen::MatrixXd::Zero(h.states(), h.states()));
  }
};

// Adds posterior-weighted counts of one sequence; returns its log-likelihood.
double accumulate(Hmm const &h, std::span<int const> x, std::span<int const> o, double weight, Counts &counts)
{
  std::size_t const L = x.size();
  int const         O = h.outputs();

  std::vector<Eigen::RowVectorXd> alpha(L);
  double                          log_p = 0.0;
  alpha[0]                              = start(h);
  for (std::size_t t = 0; t + 1 < L; ++t)
  {
    Eigen::RowVectorXd next = advance(h, alpha[t], x[t], o[t]);
    double const       c    = next.sum();
    if (!(c > 0.0))
    {
      return -kInf;
    }
    log_p += std::log(c);
    alpha[t + 1] = next / c;
  }
  double const last = finish(h, alpha[L - 1], x[L - 1], o[L - 1]);
  if (!(last > 0.0))
  {
    return -kInf;
  }
  log_p += std::log(last);

  std::vector<Eigen::VectorXd> beta(L);
  beta[L - 1] = o[L - 1] == kMaskedOutput ? Eigen::VectorXd::Ones(h.states())
                                          : Eigen::VectorXd(h.emission(x[L - 1]).col(o[L - 1]));
  beta[L - 1] /= beta[L - 1].sum();
  for (std::size_t t = L - 1; t-- > 0;)
  {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(h.states());
    for (int out = 0; out < O; ++out)
    {
      if (o[t] != kMaskedOutput && o[t] != out)
      {
        continue;
      }
      b += h.emission(x[t]).col(out).cwiseProduct(h.transition(x[t], out) * beta[t + 1]);
    }
    beta[t] = b / b.sum();
  }

  for (std::size_t t = 0; t + 1 < L; ++t)
  {
    std::vector<Eigen::MatrixXd> xi(static_cast<std::size_t>(O));
    double                       total = 0.0;
    for (int out = 0; out < O; ++out)
    {
      if (o[t] != kMaskedOutput && o[t] != out)
      {
        continue;
      }
      Eigen::VectorXd const from = alpha[t].transpose().cwiseProduct(h.emission(x[t]).col(out));
      xi[static_cast<std::size_t>(out)] =
        from.asDiagonal() * h.transition(x[t], out) * beta[t + 1].asDiagonal();
      total += xi[static_cast<std::size_t>(out)].sum();
    }
    for (int out = 0; out < O; ++out)
    {
      auto &m = xi[static_cast<std::size_t>(out)];
      if (m.size() == 0)
      {
        continue;
      }
      m *= weight / total;
      counts.emission[static_cast<std::size_t>(x[t])].col(out) += m.rowwise().sum();
      counts.transition[static_cast<std::size_t>(x[t] * O + out)] += m;
    }
  }

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(h.states(), O);
  for (int out = 0; out < O; ++out)
  {
    if (o[L - 1] == kMaskedOutput || o[L - 1] == out)
    {
      gamma.col(out) = alpha[L - 1].transpose().cwiseProduct(h.emission(x[L - 1]).col(out));
    }
  }
  counts.emission[static_cast<std::size_t>(x[L - 1])] += gamma * (weight / gamma.sum());
  return log_p;
}

void normalize_rows(Eigen::MatrixXd &params, Eigen::MatrixXd const &counts)
{
  for (Eigen::Index r = 0; r < params.rows(); ++r)
  {
    double const sum = counts.row(r).sum();
    if (sum > 0.0)
    {
      params.row(r) = counts.row(r) / sum;
    }
  }
}

void check_init(Hmm const &h)
{
  auto check = [](Eigen::MatrixXd const &m, char const *what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
      if (!(m.row(r).sum() > 0.0))
      {
        throw DegenerateInit(std::string(what) + " row " + std::to_string(r) + " is all zero");
      }
    }
  };
  for (int x = 0; x < h.inputs(); ++x)
  {
    check(h.emission(x), "emission");
    for (int o = 0; o < h.outputs(); ++o)
    {
      check(h.transition(x, o), "transition");
    }
  }
}

double log_ratio_term(double p, double q)
{
  if (p <= 0.0)
  {
    return 0.0;
  }
  if (q <= 0.0)
  {
    return kInf;
  }
  return p * std::log(p / q);
}

}  // namespace

Hmm::Hmm(int states, int inputs, int outputs) : states_(states), inputs_(inputs), outputs_(outputs)
{
  if (states < 1 || inputs < 1 || outputs < 1)
  {
    throw InvalidModel("HMM dimensions must be positive");
  }
  emission_.assign(static_cast<std::size_t>(inputs),
                   Eigen::MatrixXd::Constant(states, outputs, 1.0 / static_cast<double>(outputs)));
  transition_.assign(static_cast<std::size_t>(inputs * outputs),
                     Eigen::MatrixXd::Constant(states, states, 1.0 / static_cast<double>(states)));
}

Hmm Hmm::random(int states, int inputs, int outputs, Rng &rng)
{
  Hmm h(states, inputs, outputs);
  for (int x = 0; x < inputs; ++x)
  {
    for (int l = 0; l < states; ++l)
    {
      h.emission(x).row(l) = dirichlet_row(outputs, rng).transpose();
    }
  }
  for (int x = 0; x < inputs; ++x)
  {
    for (int o = 0; o < outputs; ++o)
    {
      for (int l = 0; l < states; ++l)
      {
        h.transition(x, o).row(l) = dirichlet_row(states, rng).transpose();
      }
    }
  }
  return h;
}

void Hmm::set_initial_state(int state)
{
  if (state < 0 || state >= states_)
  {
    throw InvalidModel("initial state out of range");
  }
  initial_ = state;
}

double Hmm::normalization_error() const
{
  double worst = 0.0;
  auto   scan  = [&](Eigen::MatrixXd const &m) {
    if ((m.array() < 0.0).any())
    {
      worst = kInf;
    }
    worst = std::max(worst, (m.rowwise().sum().array() - 1.0).abs().maxCoeff());
  };
  for (auto const &m : emission_)
  {
    scan(m);
  }
  for (auto const &m : transition_)
  {
    scan(m);
  }
  return worst;
}

std::size_t Hmm::free_parameters() const noexcept
{
  auto const m = static_cast<std::size_t>(states_);
  auto const X = static_cast<std::size_t>(inputs_);
  auto const O = static_cast<std::size_t>(outputs_);
  return m * X * (O - 1) + m * X * O * (m - 1);
}

double hmm_prob(Hmm const &h, std::span<int const> x, std::span<int const> o)
{
  check_sequence(h, x, o);
  if (x.empty())
  {
    return 1.0;
  }
  Eigen::RowVectorXd a = start(h);
  for (std::size_t t = 0; t + 1 < x.size(); ++t)
  {
    a = advance(h, a, x[t], o[t]);
  }
  return finish(h, a, x.back(), o.back());
}

double hmm_log_prob(Hmm const &h, std::span<int const> x, std::span<int const> o)
{
  check_sequence(h, x, o);
  if (x.empty())
  {
    return 0.0;
  }
  Eigen::RowVectorXd a     = start(h);
  double             log_p = 0.0;
  for (std::size_t t = 0; t + 1 < x.size(); ++t)
  {
    a              = advance(h, a, x[t], o[t]);
    double const c = a.sum();
    if (!(c > 0.0))
    {
      return -kInf;
    }
    log_p += std::log(c);
    a /= c;
  }
  double const last = finish(h, a, x.back(), o.back());
  return last > 0.0 ? log_p + std::log(last) : -kInf;
}

Eigen::VectorXd latent_marginal(Hmm const &h, std::span<int const> x)
{
  std::vector<int> masked(x.size(), kMaskedOutput);
  check_sequence(h, x, masked);
  Eigen::RowVectorXd a = start(h);
  for (int token : x)
  {
    a = advance(h, a, token, kMaskedOutput);
  }
  return a.transpose();
}

double context_prob(Hmm const &h, EncodedContext const &context, std::span<OutcomeId const> outcome)
{
  auto const outputs = context.outputs_for(outcome);
  return hmm_prob(h, context.inputs, outputs);
}

std::pair<Hmm, TrainReport> baum_welch(EmpiricalModel const &model, int states, BaumWelchOptions const &options)
{
  if (states < 1)
  {
    throw InvalidModel("HMM needs at least one state");
  }
  auto const enc = encode_sequences(model);
  Hmm        h   = [&] {
    if (options.init)
    {
      return *options.init;
    }
    Rng rng(options.seed);
    return Hmm::random(states, enc.input_alphabet, enc.num_outcomes, rng);
  }();
  if (h.states() != states || h.inputs() != enc.input_alphabet || h.outputs() != enc.num_outcomes)
  {
    throw DimensionMismatch("initial HMM does not match the model's sequence encoding");
  }
  check_init(h);

  double const context_weight = 1.0 / static_cast<double>(model.num_contexts());
  TrainReport  report;
  report.seed = options.seed;
  for (std::size_t iter = 0; iter < options.max_iters; ++iter)
  {
    Counts counts(h);
    double ll = 0.0;
    for (std::size_t c = 0; c < model.num_contexts(); ++c)
    {
      auto const &ctx = enc.contexts[c];
      for (auto const &entry : model.distribution(c).entries)
      {
        auto const outputs = ctx.outputs_for(entry.outcome);
        ll += context_weight * entry.p * accumulate(h, ctx.inputs, outputs, context_weight * entry.p, counts);
      }
    }
    report.log_likelihood.push_back(ll);
    std::size_t const n = report.log_likelihood.size();
    if (n >= 2 && report.log_likelihood[n - 1] - report.log_likelihood[n - 2] < options.tol)
    {
      report.converged = true;
      break;
    }
    if (!std::isfinite(ll))
    {
      break;
    }
    for (int x = 0; x < h.inputs(); ++x)
    {
      normalize_rows(h.emission(x), counts.emission[static_cast<std::size_t>(x)]);
      for (int o = 0; o < h.outputs(); ++o)
      {
        normalize_rows(h.transition(x, o), counts.transition[static_cast<std::size_t>(x * h.outputs() + o)]);
      }
    }
    ++report.iterations;
  }
  if (!report.converged)
  {
    report.log_likelihood.push_back(average_log_likelihood(model, h));
  }
  report.kl = kl_divergence(model, h);
  return {std::move(h), std::move(report)};
}

std::pair<Hmm, TrainReport> baum_welch_best(EmpiricalModel const  &model,
                                            int                    states,
                                            std::size_t            restarts,
                                            BaumWelchOptions const &options)
{
  std::optional<std::pair<Hmm, TrainReport>> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r)
  {
    BaumWelchOptions run = options;
    run.seed             = options.seed + r;
    auto result          = baum_welch(model, states, run);
    if (!best || result.second.kl < best->second.kl)
    {
      best = std::move(result);
    }
  }
  return std::move(*best);
}

double average_log_likelihood(EmpiricalModel const &model, Hmm const &h)
{
  auto const enc = encode_sequences(model);
  double     ll  = 0.0;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    auto const &ctx = enc.contexts[c];
    for (auto const &entry : model.distribution(c).entries)
    {
      auto const outputs = ctx.outputs_for(entry.outcome);
      ll += entry.p * hmm_log_prob(h, ctx.inputs, outputs);
    }
  }
  return ll / static_cast<double>(model.num_contexts());
}

double kl_divergence(EmpiricalModel const &target, Hmm const &h)
{
  auto const enc   = encode_sequences(target);
  double     total = 0.0;
  for (std::size_t c = 0; c < target.num_contexts(); ++c)
  {
    for (auto const &entry : target.distribution(c).entries)
    {
      total += log_ratio_term(entry.p, context_prob(h, enc.contexts[c], entry.outcome));
    }
  }
  return total / static_cast<double>(target.num_contexts());
}

double kl_divergence_model_to_target(EmpiricalModel const &target, Hmm const &h, double leak_tolerance)
{
  auto const enc   = encode_sequences(target);
  double     total = 0.0;
  for (std::size_t c = 0; c < target.num_contexts(); ++c)
  {
    double inside = 0.0;
    for (auto const &entry : target.distribution(c).entries)
    {
      double const p = context_prob(h, enc.contexts[c], entry.outcome);
      inside += p;
      total += log_ratio_term(p, entry.p);
    }
    if (1.0 - inside > leak_tolerance)
    {
      return kInf;
    }
  }
  return total / static_cast<double>(target.num_contexts());
}

std::vector<SupportEvent> support_violation(EmpiricalModel const &model, Hmm const &h, double eps)
{
  auto const                enc = encode_sequences(model);
  std::vector<SupportEvent> events;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    for (auto const &entry : model.distribution(c).entries)
    {
      double const p = context_prob(h, enc.contexts[c], entry.outcome);
      if (p < eps || p <= 0.0)
      {
        events.push_back({c, entry.outcome, entry.p, p});
      }
    }
  }
  return events;
}

std::vector<SupportEvent> support_leaks(EmpiricalModel const &model,
                                        Hmm const            &h,
                                        double                eps,
                                        std::size_t           max_reports)
{
  auto const                enc = encode_sequences(model);
  std::vector<SupportEvent> events;
  for (std::size_t c = 0; c < model.num_contexts() && events.size() < max_reports; ++c)
  {
    auto const        &ctx = enc.contexts[c];
    Eigen::RowVectorXd a   = start(h);
    for (std::size_t t = 0; t < ctx.label_length; ++t)
    {
      a = advance(h, a, ctx.inputs[t], kMaskedOutput);
    }
    Outcome prefix;
    auto    search = [&](auto &self, Eigen::RowVectorXd const &state) -> void {
      std::size_t const pos = ctx.label_length + prefix.size();
      int const         x   = ctx.inputs[pos];
      bool const        last = pos + 1 == ctx.length();
      for (int o = 0; o < h.outputs() && events.size() < max_reports; ++o)
      {
        Eigen::RowVectorXd const v    = state.cwiseProduct(h.emission(x).col(o).transpose());
        double const             mass = v.sum();
        if (!(mass > eps))
        {
          continue;
        }
        prefix.push_back(o);
        if (last)
        {
          if (!model.in_support(c, prefix))
          {
            events.push_back({c, prefix, 0.0, mass});
          }
        }
        else
        {
          self(self, Eigen::RowVectorXd(v * h.transition(x, o)));
        }
        prefix.pop_back();
      }
    };
    search(search, a);
  }
  return events;
}

std::vector<double> leaked_mass(EmpiricalModel const &model, Hmm const &h)
{
  auto const          enc = encode_sequences(model);
  std::vector<double> leaks;
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    double inside = 0.0;
    for (auto const &entry : model.distribution(c).entries)
    {
      inside += context_prob(h, enc.contexts[c], entry.outcome);
    }
    leaks.push_back(std::max(0.0, 1.0 - inside));
  }
  return leaks;
}

}  // namespace kontext
