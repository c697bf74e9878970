#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace flashpoint {
namespace stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 0.0;
  long dof = 0;  // chi-square only
};

// Upper regularized incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);

// Survival function of the chi-square distribution with dof degrees of freedom.
double chi_square_sf(double stat, long dof);

// Asymptotic Kolmogorov p-value with the usual finite-n correction.
double ks_pvalue(double d, size_t n);

// One-sample KS test of xs against Exp(rate).
TestResult ks_test_exponential(std::vector<double> xs, double rate);

// One-sample KS test against an arbitrary CDF given as callable.
TestResult ks_test_cdf(std::vector<double> xs, const std::function<double(double)>& cdf);

// Goodness of fit of observed counts to expected probabilities; cells with
// expected count below min_expected are pooled into their neighbor.
TestResult chi_square_gof(const std::vector<double>& observed,
                          const std::vector<double>& expected_probs,
                          double min_expected = 5.0);

// Independence test on a contingency table (rows x cols of counts).
TestResult chi_square_independence(const std::vector<std::vector<double>>& table);

struct MomentSummary {
  size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

MomentSummary moments(const std::vector<double>& xs);

}  // namespace stats
}  // namespace flashpoint
