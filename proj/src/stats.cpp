#include "kontext/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kontext/error.hpp"

namespace kontext {

namespace {

double gamma_series(double a, double x)
{
  double term = 1.0 / a;
  double sum  = term;
  for (int n = 1; n < 10'000; ++n)
  {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16)
    {
      break;
    }
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by Lentz's continued fraction.
double gamma_continued_fraction(double a, double x)
{
  double constexpr tiny = 1e-300;
  double b              = x + 1.0 - a;
  double c              = 1.0 / tiny;
  double d              = 1.0 / b;
  double h              = d;
  for (int i = 1; i < 10'000; ++i)
  {
    double const an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny)
    {
      d = tiny;
    }
    c = b + an / c;
    if (std::abs(c) < tiny)
    {
      c = tiny;
    }
    d              = 1.0 / d;
    double const f = d * c;
    h *= f;
    if (std::abs(f - 1.0) < 1e-16)
    {
      break;
    }
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

std::vector<double> ranks(std::span<double const> v)
{
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();)
  {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
    {
      ++j;
    }
    double const avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
    {
      r[order[k]] = avg;
    }
    i = j + 1;
  }
  return r;
}

}  // namespace

double regularized_gamma_p(double a, double x)
{
  if (!(a > 0.0) || x < 0.0 || std::isnan(x))
  {
    throw InvalidModel("incomplete gamma needs a > 0 and x >= 0");
  }
  if (x == 0.0)
  {
    return 0.0;
  }
  if (std::isinf(x))
  {
    return 1.0;
  }
  if (x < a + 1.0)
  {
    return std::min(1.0, gamma_series(a, x));
  }
  return std::max(0.0, 1.0 - gamma_continued_fraction(a, x));
}

double chi2_cdf(double x, double df)
{
  if (!(df > 0.0))
  {
    throw InvalidModel("chi-squared needs df > 0");
  }
  if (x <= 0.0)
  {
    return 0.0;
  }
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

LrTestResult likelihood_ratio_test(double ll_classical_per_token,
                                   double ll_quantum_per_token,
                                   double n_tokens,
                                   double df)
{
  if (df < 1.0)
  {
    throw InvalidModel("likelihood-ratio test needs df >= 1");
  }
  LrTestResult r;
  r.df        = df;
  r.scale     = 2.0 * n_tokens;
  r.statistic = std::max(0.0, r.scale * (ll_quantum_per_token - ll_classical_per_token));
  if (std::isnan(r.statistic))
  {
    r.statistic = 0.0;
  }
  r.p_value          = std::clamp(1.0 - chi2_cdf(r.statistic, df), 0.0, 1.0);
  r.reject_at_3sigma = r.p_value < kThreeSigmaLevel;
  return r;
}

Correlation spearman(std::span<double const> x, std::span<double const> y)
{
  if (x.size() != y.size())
  {
    throw DimensionMismatch("spearman needs equal-length samples");
  }
  Correlation out;
  std::size_t const n = x.size();
  if (n < 3)
  {
    return out;
  }
  auto const   rx = ranks(x);
  auto const   ry = ranks(y);
  double const mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  double const my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double       sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
  {
    return out;
  }
  out.rho = sxy / std::sqrt(sxx * syy);
  if (std::abs(out.rho) >= 1.0)
  {
    out.p_value     = 0.0;
    out.one_sided_p = out.rho > 0 ? 0.0 : 1.0;
    return out;
  }
  double const                       dof = static_cast<double>(n - 2);
  double const                       t   = out.rho * std::sqrt(dof / (1.0 - out.rho * out.rho));
  boost::math::students_t_distribution<double> dist(dof);
  out.one_sided_p = boost::math::cdf(boost::math::complement(dist, t));
  out.p_value     = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

}  // namespace kontext
