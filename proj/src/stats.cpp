#include "flashpoint/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace flashpoint {
namespace stats {

namespace {

// Lower regularized incomplete gamma by series expansion, for x < a + 1.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  double ap = a;
  for (int k = 0; k < 500; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by continued fraction, for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("regularized_gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double stat, long dof) {
  if (dof <= 0) return 1.0;
  return regularized_gamma_q(0.5 * static_cast<double>(dof), 0.5 * stat);
}

double ks_pvalue(double d, size_t n) {
  double sn = std::sqrt(static_cast<double>(n));
  double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

TestResult ks_test_cdf(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("ks_test_cdf: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return {d, ks_pvalue(d, xs.size()), 0};
}

TestResult ks_test_exponential(std::vector<double> xs, double rate) {
  return ks_test_cdf(std::move(xs),
                     [rate](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * x); });
}

TestResult chi_square_gof(const std::vector<double>& observed,
                          const std::vector<double>& expected_probs,
                          double min_expected) {
  if (observed.size() != expected_probs.size() || observed.empty())
    throw std::invalid_argument("chi_square_gof: size mismatch");
  double n = 0.0;
  for (double o : observed) n += o;
  // Pool neighboring cells until every expected count is large enough.
  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected_probs[i] * n;
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  double stat = 0.0;
  for (size_t i = 0; i < obs.size(); ++i) {
    if (exp[i] <= 0.0) continue;
    double diff = obs[i] - exp[i];
    stat += diff * diff / exp[i];
  }
  long dof = static_cast<long>(obs.size()) - 1;
  if (dof < 1) dof = 1;
  return {stat, chi_square_sf(stat, dof), dof};
}

TestResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  if (table.empty() || table.front().empty())
    throw std::invalid_argument("chi_square_independence: empty table");
  const size_t rows = table.size(), cols = table.front().size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      row_sum[r] += table[r][c];
      col_sum[c] += table[r][c];
      total += table[r][c];
    }
  if (total <= 0.0) throw std::invalid_argument("chi_square_independence: empty counts");
  double stat = 0.0;
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      double e = row_sum[r] * col_sum[c] / total;
      if (e <= 0.0) continue;
      double diff = table[r][c] - e;
      stat += diff * diff / e;
    }
  long dof = static_cast<long>(rows - 1) * static_cast<long>(cols - 1);
  if (dof < 1) dof = 1;
  return {stat, chi_square_sf(stat, dof), dof};
}

MomentSummary moments(const std::vector<double>& xs) {
  MomentSummary m;
  m.n = xs.size();
  if (m.n == 0) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  if (m.n > 1) {
    for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
    m.variance /= static_cast<double>(m.n - 1);
  }
  return m;
}

}  // namespace stats
}  // namespace flashpoint
