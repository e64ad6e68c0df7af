#pragma once

#include <cstddef>
#include <span>

namespace kontext {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// CDF of the chi-squared distribution with `df` degrees of freedom.
double chi2_cdf(double x, double df);

struct LrTestResult
{
  double statistic        = 0.0;
  double df               = 1.0;
  double p_value          = 1.0;
  bool   reject_at_3sigma = false;
  /// Factor applied to the per-token log-likelihood difference (2 N).
  double scale = 0.0;
};

inline constexpr double kThreeSigmaLevel = 2.7e-3;

/// statistic = max(0, 2 N (ll_q - ll_c)) with per-token log-likelihoods;
/// p = 1 - chi2_cdf(statistic, df).
LrTestResult likelihood_ratio_test(double ll_classical_per_token,
                                   double ll_quantum_per_token,
                                   double n_tokens,
                                   double df);

struct Correlation
{
  double rho     = 0.0;
  double p_value = 1.0;  // two-sided, t approximation
  double one_sided_p = 1.0;  // alternative rho > 0
};

/// Spearman rank correlation with average ranks for ties.
Correlation spearman(std::span<double const> x, std::span<double const> y);

}  // namespace kontext
