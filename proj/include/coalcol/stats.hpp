#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "coalcol/error.hpp"
#include "coalcol/special.hpp"

namespace coalcol {

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double third_central = 0.0;
  std::size_t count = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  CompensatedSum sum;
  for (double x : xs) sum += x;
  s.mean = sum.value() / static_cast<double>(xs.size());
  CompensatedSum sq;
  CompensatedSum cube;
  for (double x : xs) {
    const double d = x - s.mean;
    sq += d * d;
    cube += d * d * d;
  }
  const double n = static_cast<double>(xs.size());
  s.variance = xs.size() > 1 ? sq.value() / (n - 1.0) : 0.0;
  s.std_error = std::sqrt(s.variance / n);
  s.third_central = cube.value() / n;
  return s;
}

// sup |F_n - F| for a continuous reference CDF.
template <class Cdf>
double ks_one_sample(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw DomainError("ks statistic of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// sup |F_a - F_b| between two empirical CDFs (handles ties).
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks statistic of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Asymptotic critical value c(level) sqrt((n+m)/(n m)), c(level) = sqrt(-ln(level/2)/2).
inline double ks_two_sample_critical(std::size_t n, std::size_t m, double level) {
  const double c = std::sqrt(-0.5 * std::log(level / 2.0));
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  return c * std::sqrt((nd + md) / (nd * md));
}

struct ChiSquareResult {
  double statistic;
  int degrees_of_freedom;
  double p_value;
};

// Pearson goodness of fit of integer-valued observations against pmf[v].
// Cells with expected count below `min_expected` are pooled with their
// neighbours (left to right; the remainder joins the last cell).
inline ChiSquareResult chi_square_gof(std::span<const long> observations, std::span<const double> pmf,
                                      double min_expected = 5.0) {
  const double n = static_cast<double>(observations.size());
  std::vector<double> counts(pmf.size(), 0.0);
  for (long v : observations) {
    if (v < 0 || static_cast<std::size_t>(v) >= pmf.size()) {
      throw DomainError("chi_square_gof: observation outside support");
    }
    counts[static_cast<std::size_t>(v)] += 1.0;
  }
  std::vector<double> obs_cells;
  std::vector<double> exp_cells;
  double o = 0.0, e = 0.0;
  for (std::size_t v = 0; v < pmf.size(); ++v) {
    o += counts[v];
    e += n * pmf[v];
    if (e >= min_expected) {
      obs_cells.push_back(o);
      exp_cells.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (exp_cells.empty()) {
      obs_cells.push_back(o);
      exp_cells.push_back(e);
    } else {
      obs_cells.back() += o;
      exp_cells.back() += e;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < obs_cells.size(); ++i) {
    const double d = obs_cells[i] - exp_cells[i];
    stat += d * d / exp_cells[i];
  }
  const int dof = static_cast<int>(obs_cells.size()) - 1;
  const double p = dof > 0 ? boost::math::gamma_q(0.5 * dof, 0.5 * stat) : 1.0;
  return {stat, dof, p};
}

// Least-squares slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log_log_slope: need matching sizes >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace coalcol
