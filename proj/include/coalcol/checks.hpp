#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "coalcol/bounds.hpp"
#include "coalcol/chain.hpp"
#include "coalcol/measure.hpp"
#include "coalcol/rates.hpp"
#include "coalcol/stable.hpp"
#include "coalcol/stats.hpp"

namespace coalcol::checks {

struct Outcome {
  std::string name;
  bool passed;
  std::string detail;
};

inline std::string format(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

// Largest relative error over 2 <= j <= b <= b_max of the consistency
// relation, total rate by moments against the row sum, the first-moment
// identity and the increment lambda_{b+1} - lambda_b = b nu_{b-1}.
inline double rate_identity_error(const LambdaMeasure& measure, long b_max) {
  std::vector<std::vector<double>> rates(static_cast<std::size_t>(b_max + 2));
  for (long b = 2; b <= b_max + 1; ++b) {
    auto& row = rates[static_cast<std::size_t>(b)];
    row.assign(static_cast<std::size_t>(b + 1), 0.0);
    for (long j = 2; j <= b; ++j) row[static_cast<std::size_t>(j)] = lambda_bj(measure, b, j);
  }
  std::vector<double> nu_values(static_cast<std::size_t>(b_max + 1));
  for (long i = 0; i <= b_max; ++i) nu_values[static_cast<std::size_t>(i)] = nu(measure, i);
  auto at = [&](long b, long j) { return j <= b ? rates[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)] : 0.0; };
  double worst = 0.0;
  std::vector<double> row_sum(static_cast<std::size_t>(b_max + 2), 0.0);
  for (long b = 2; b <= b_max + 1; ++b) {
    CompensatedSum s;
    for (long j = 2; j <= b; ++j) s += at(b, j);
    row_sum[static_cast<std::size_t>(b)] = s.value();
  }
  for (long b = 2; b <= b_max; ++b) {
    const double bd = static_cast<double>(b);
    for (long j = 2; j <= b; ++j) {
      const double jd = static_cast<double>(j);
      const double lhs = (bd + 1.0) * at(b, j);
      const double rhs = (bd + 1.0 - jd) * at(b + 1, j) + (jd + 1.0) * at(b + 1, j + 1);
      worst = std::max(worst, relative_difference(lhs, rhs));
    }
    worst = std::max(worst, relative_difference(row_sum[static_cast<std::size_t>(b)], lambda_total_from_moments(measure, b)));
    CompensatedSum first, by_nu;
    for (long j = 2; j <= b; ++j) first += (static_cast<double>(j) - 1.0) * at(b, j);
    for (long i = 1; i < b; ++i) by_nu += (bd - static_cast<double>(i)) * nu_values[static_cast<std::size_t>(i - 1)];
    worst = std::max(worst, relative_difference(first.value(), by_nu.value()));
    const double increment = row_sum[static_cast<std::size_t>(b + 1)] - row_sum[static_cast<std::size_t>(b)];
    worst = std::max(worst, relative_difference(increment, bd * nu_values[static_cast<std::size_t>(b - 1)]));
  }
  return worst;
}

inline Outcome rate_identities(long b_max = 200, double tol = 1e-9) {
  const double leb = rate_identity_error(LambdaMeasure::lebesgue(), b_max);
  const double beta = rate_identity_error(LambdaMeasure::beta(0.5, 1.5), b_max);
  return {"rate identities, b <= " + std::to_string(b_max), std::max(leb, beta) < tol,
          format("max rel err lebesgue %.2e, beta(1/2,3/2) %.2e (tol %.0e)", leb, beta, tol)};
}

// Largest relative error of the mixture's jump law against its closed forms:
// (2-alpha)(alpha)_{j-2}/j! for j < n, and at j = n the telescoped tail
// sum_{j >= n} of that law, (alpha)_{n-2}/(n-1)! = Gamma(n+alpha-2)/((n-1)! Gamma(alpha)).
// The total-merger rate lambda_{n,n} = (1-alpha/2) alpha/(n+alpha-2) + alpha/2 is checked too.
inline double example_closed_form_error(double alpha, long n) {
  const auto measure = LambdaMeasure::truncated_limit_example(alpha);
  const auto dist = jump_distribution(measure, n);
  RateTable table(measure, n);
  const auto row = table.jump_row(n);
  double worst = 0.0;
  for (long j = 2; j <= n; ++j) {
    const double jd = static_cast<double>(j);
    const double expected =
        j < n ? (2.0 - alpha) * std::exp(std::lgamma(alpha + jd - 2.0) - std::lgamma(alpha) - std::lgamma(jd + 1.0))
              : std::exp(std::lgamma(jd + alpha - 2.0) - std::lgamma(jd) - std::lgamma(alpha));
    worst = std::max(worst, relative_difference(dist(j), expected));
    worst = std::max(worst, relative_difference(row[static_cast<std::size_t>(j - 2)], expected));
  }
  const double nd = static_cast<double>(n);
  const double full = (1.0 - alpha / 2.0) * alpha / (nd + alpha - 2.0) + alpha / 2.0;
  worst = std::max(worst, relative_difference(lambda_bj(measure, n, n), full));
  return worst;
}

inline Outcome example_closed_forms(double tol = 1e-9) {
  double worst = 0.0;
  for (double alpha : {0.3, 0.5, 0.8}) {
    for (long n : {10L, 50L, 200L}) worst = std::max(worst, example_closed_form_error(alpha, n));
  }
  return {"mixture jump law equals its closed forms", worst < tol, format("max rel err %.2e (tol %.0e)", worst, tol)};
}

// Exact pmf against Green-kernel moments, and simulated counts against the pmf.
inline Outcome oracle_equivalence(std::size_t replicates, std::uint64_t seed, const std::vector<long>& chi_square_n) {
  double worst = 0.0;
  double min_p = 1.0;
  for (const auto& measure : {LambdaMeasure::lebesgue(), LambdaMeasure::beta(0.5, 1.5)}) {
    RateTable table(measure, 50);
    for (long n = 2; n <= 50; ++n) {
      const auto pmf = exact_distribution(table, n);
      const auto m = exact_moments(table, n);
      worst = std::max(worst, std::abs(pmf.mean() - m.mean) / std::max(1.0, m.mean));
      worst = std::max(worst, std::abs(pmf.variance() - m.variance()) / std::max(1.0, m.variance()));
    }
    for (long n : chi_square_n) {
      const auto pmf = exact_distribution(table, n);
      const auto counts = parallel_map<long>(replicates, [&](std::size_t r) {
        RngStream rng(seed, r);
        return simulate_collisions(table, n, rng);
      });
      min_p = std::min(min_p, chi_square_gof(counts, pmf.pmf).p_value);
    }
  }
  return {"exact pmf vs Green-kernel moments and simulation", worst < 1e-9 && min_p > 1e-3,
          format("max moment err %.2e (tol 1e-09), min chi-square p %.4f (need > 0.001)", worst, min_p)};
}

// The alternating sum loses accuracy through cancellation, so each entry is
// compared against 64 eps times its condition number sum|terms| / |sum terms|.
inline Outcome alternating_sum_oracle(long b_max = 30) {
  double worst = 0.0;
  double worst_cond = 1.0;
  for (const auto& measure : {LambdaMeasure::lebesgue(), LambdaMeasure::beta(0.5, 1.5)}) {
    std::vector<double> nus;
    for (long i = 0; i <= b_max; ++i) nus.push_back(nu(measure, i));
    for (long b = 2; b <= b_max; ++b) {
      for (long j = 2; j <= b; ++j) {
        double abs_terms = 0.0;
        for (long s = 0; s <= j - 2; ++s) abs_terms += choose(j - 2, s) * nus[static_cast<std::size_t>(b - 2 - s)];
        const double exact = lambda_bj(measure, b, j);
        const double cond = abs_terms * choose(b, j) / exact;
        const double err = relative_difference(rates_from_nu_alternating(nus, b, j), exact);
        const double scaled = err / (64.0 * std::numeric_limits<double>::epsilon() * cond);
        if (scaled > worst) worst = scaled, worst_cond = cond;
      }
    }
  }
  return {"alternating-sum rates agree with closed forms, b <= " + std::to_string(b_max), worst <= 1.0,
          format("max err / (64 eps cond) = %.3f (cond %.2e)", worst, worst_cond)};
}

inline Outcome green_kernel_conservation() {
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 1000);
  const auto g = green_kernel(table, 1000);
  double lo = 1.0, hi = 0.0;
  for (long b = 1; b <= 1000; ++b) lo = std::min(lo, g(b)), hi = std::max(hi, g(b));
  const double err = std::abs(g(1) - 1.0);
  return {"Green kernel: g(n,1) = 1 and 0 <= g <= 1", err <= 1e-10 * 1000 && lo >= 0.0 && hi <= 1.0 + 1e-12,
          format("|g(1000,1)-1| = %.2e, range [%.4f, %.4f]", err, lo, hi)};
}

inline Outcome stable_identities(double alpha = 0.5) {
  const StableLaw law(alpha);
  const StableLaw mirror = StableLaw::mirrored(alpha);
  double modulus = 0.0, canonical = 0.0, mirrored = 0.0;
  for (double u = -20.0; u <= 20.0; u += 0.125) {
    const double expected = std::exp(-std::cos(std::numbers::pi * alpha / 2.0) * std::pow(std::abs(u), 2.0 - alpha));
    modulus = std::max(modulus, std::abs(std::abs(law.cf(u)) - expected));
    canonical = std::max(canonical, std::abs(law.cf(u) - law.cf_canonical(u)));
  }
  for (double t = -10.0; t <= 10.0; t += 0.5) {
    mirrored = std::max(mirrored, std::abs(law.cdf_inversion(t) - (1.0 - mirror.cdf_integral(-t))));
  }
  const bool ok = modulus <= 1e-14 && canonical <= 1e-14 && mirrored <= 1e-7;
  return {"stable law: CF modulus, canonical form, mirror identity", ok,
          format("modulus %.1e, canonical %.1e, mirror %.1e", modulus, canonical, mirrored)};
}

inline Outcome feasible_parameters() {
  const BoundParams example{0.40, 0.82, 0.893, 0.99};
  const bool example_ok = satisfies_constraints(example, 0.5, 1.0, ConstraintSet::stable_limit);
  const auto found = find_feasible_params(0.5, 1.0, ConstraintSet::stable_limit);
  const double slack = minimum_slack(evaluate_constraints(found, 0.5, 1.0, ConstraintSet::stable_limit));
  bool rejected = false;
  try {
    find_feasible_params(0.5, 0.2, ConstraintSet::stable_limit);
  } catch (const InfeasibleParams&) {
    rejected = true;
  }
  return {"bound parameters: feasibility search and hypothesis check", example_ok && slack >= kFeasibilitySlack && rejected,
          format("search slack %.4f, example feasible %.0f, varsigma=0.2 rejected %.0f", slack, example_ok, rejected)};
}

inline Outcome worker_independence() {
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 1000);
  auto run = [&](unsigned workers) {
    return parallel_map<long>(
        400,
        [&](std::size_t r) {
          RngStream rng(77, r);
          return simulate_collisions(table, 1000, rng);
        },
        workers);
  };
  const bool same = run(1) == run(3);
  return {"simulation output independent of worker count", same, same ? "identical" : "differs"};
}

// Fast invariant suite behind `coalcol check`.
inline std::vector<Outcome> invariant_suite() {
  std::vector<std::function<Outcome()>> checks{
      [] { return rate_identities(); },
      [] { return example_closed_forms(); },
      [] { return alternating_sum_oracle(); },
      [] { return oracle_equivalence(20000, 11, {10, 30}); },
      [] { return green_kernel_conservation(); },
      [] { return stable_identities(); },
      [] { return feasible_parameters(); },
      [] { return worker_independence(); },
  };
  std::vector<Outcome> out;
  for (auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"(check threw)", false, e.what()});
    }
  }
  return out;
}

}  // namespace coalcol::checks
