#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "coalcol/checks.hpp"
#include "coalcol/rates.hpp"

using namespace coalcol;

namespace {

// Example measure rate for j < n in log-gamma form:
// alpha (1 - alpha/2) C(n,j) Gamma(j+alpha-2) (n-j)! / Gamma(n+alpha-1).
double example_rate(double alpha, long n, long j) {
  const double nd = static_cast<double>(n), jd = static_cast<double>(j);
  return alpha * (1.0 - alpha / 2.0) *
         std::exp(std::lgamma(nd + 1.0) - std::lgamma(jd + 1.0) + std::lgamma(jd + alpha - 2.0) -
                  std::lgamma(nd + alpha - 1.0));
}

}  // namespace

TEST(LambdaBj, Kingman) {
  EXPECT_DOUBLE_EQ(lambda_bj(LambdaMeasure::kingman(), 7, 2), 21.0);
  EXPECT_DOUBLE_EQ(lambda_bj(LambdaMeasure::kingman(), 7, 3), 0.0);
}

TEST(LambdaBj, LebesgueSmall) {
  EXPECT_NEAR(lambda_bj(LambdaMeasure::lebesgue(), 3, 2), 1.5, 1e-15);
  EXPECT_NEAR(lambda_bj(LambdaMeasure::lebesgue(), 3, 3), 0.5, 1e-15);
}

TEST(LambdaBj, ExampleMeasureClosedForm) {
  const double alpha = 0.5;
  const auto m = LambdaMeasure::truncated_limit_example(alpha);
  for (long j = 2; j < 50; ++j) EXPECT_NEAR(lambda_bj(m, 50, j) / example_rate(alpha, 50, j), 1.0, 1e-9) << j;
  // Quadrature route: the same density declared as a general density.
  const LambdaMeasure general({{GeneralDensity{[=](double x) { return alpha * std::pow(x, alpha - 1.0); },
                                               PowerLaw{1.0, alpha, 1.0}},
                                1.0 - alpha / 2.0},
                               {Atom{1.0}, alpha / 2.0}});
  for (long j : {2L, 3L, 10L, 25L, 49L}) {
    EXPECT_NEAR(lambda_bj(general, 50, j) / example_rate(alpha, 50, j), 1.0, 1e-9) << j;
  }
  EXPECT_NEAR(lambda_bj(m, 50, 50), (1.0 - alpha / 2.0) * alpha / (50.0 + alpha - 2.0) + alpha / 2.0, 1e-13);
}

TEST(LambdaBj, OutOfRange) {
  EXPECT_THROW(lambda_bj(LambdaMeasure::lebesgue(), 3, 4), DomainError);
  EXPECT_THROW(lambda_bj(LambdaMeasure::lebesgue(), 3, 1), DomainError);
}

TEST(LambdaTotal, Examples) {
  EXPECT_DOUBLE_EQ(lambda_total(LambdaMeasure::kingman(), 5), 10.0);
  EXPECT_NEAR(lambda_total(LambdaMeasure::lebesgue(), 3), 2.0, 1e-15);
  for (long b : {2L, 10L, 100L}) EXPECT_NEAR(lambda_total(LambdaMeasure::lebesgue(), b), b - 1.0, 1e-12);
}

TEST(LambdaTotal, RoutesAgreeForGeneralDensity) {
  const LambdaMeasure general({{GeneralDensity{[](double x) { return 2.0 * x; }, std::nullopt}, 1.0}});
  EXPECT_NO_THROW(lambda_total(general, 60));
}

TEST(Identities, ConsistencyAndMomentsUpTo200) {
  EXPECT_LT(checks::rate_identity_error(LambdaMeasure::lebesgue(), 200), 1e-10);
  EXPECT_LT(checks::rate_identity_error(LambdaMeasure::beta(0.5, 1.5), 200), 1e-10);
  EXPECT_LT(checks::rate_identity_error(LambdaMeasure::truncated_limit_example(0.3), 200), 1e-10);
}

TEST(Alternating, LebesgueSmall) {
  std::vector<double> nus;
  for (long i = 0; i <= 10; ++i) nus.push_back(nu(LambdaMeasure::lebesgue(), i));
  EXPECT_NEAR(rates_from_nu_alternating(nus, 3, 2), 1.5, 1e-14);
  EXPECT_NEAR(rates_from_nu_alternating(nus, 3, 3), 0.5, 1e-14);
}

TEST(Alternating, KingmanCancels) {
  std::vector<double> ones(20, 1.0);
  EXPECT_NEAR(rates_from_nu_alternating(ones, 10, 4), 0.0, 1e-9);
  EXPECT_NEAR(rates_from_nu_alternating(ones, 10, 2), 45.0, 1e-12);
}

TEST(Alternating, SignConventionAtFive) {
  const auto m = LambdaMeasure::beta(0.5, 1.5);
  std::vector<double> nus;
  for (long i = 0; i <= 5; ++i) nus.push_back(nu(m, i));
  for (long j = 2; j <= 5; ++j) {
    EXPECT_NEAR(rates_from_nu_alternating(nus, 5, j) / lambda_bj(m, 5, j), 1.0, 1e-12) << j;
  }
}

TEST(Alternating, WithinConditionBound) { EXPECT_TRUE(checks::alternating_sum_oracle().passed); }

TEST(Alternating, RefusesLargeB) {
  std::vector<double> nus(60, 0.5);
  EXPECT_THROW(rates_from_nu_alternating(nus, 41, 3), DomainError);
}

TEST(JumpDistribution, Examples) {
  const auto kingman = jump_distribution(LambdaMeasure::kingman(), 9);
  EXPECT_DOUBLE_EQ(kingman(2), 1.0);
  const auto leb = jump_distribution(LambdaMeasure::lebesgue(), 3);
  EXPECT_NEAR(leb(2), 0.75, 1e-15);
  EXPECT_NEAR(leb(3), 0.25, 1e-15);
  EXPECT_NEAR(jump_distribution(LambdaMeasure::truncated_limit_example(0.5), 20)(2), 0.75, 1e-14);
}

TEST(JumpDistribution, Normalized) {
  for (long b : {2L, 17L, 300L}) {
    const auto d = jump_distribution(LambdaMeasure::beta(0.5, 1.5), b);
    CompensatedSum s;
    for (double q : d.pmf) {
      EXPECT_GE(q, 0.0);
      s += q;
    }
    EXPECT_NEAR(s.value(), 1.0, 1e-12);
  }
}

TEST(JumpDistribution, ExampleClosedForms) {
  // The tail at j = n is the mass the limit law puts on {n, n+1, ...}.
  for (double alpha : {0.3, 0.5, 0.8}) {
    for (long n : {10L, 50L, 200L}) EXPECT_LT(checks::example_closed_form_error(alpha, n), 1e-12);
  }
}

TEST(RateTable, MatchesFreeFunctions) {
  for (const auto& m : {LambdaMeasure::beta(0.5, 1.5), LambdaMeasure::truncated_limit_example(0.5),
                        LambdaMeasure::lebesgue(), LambdaMeasure::kingman(),
                        LambdaMeasure({{BetaDensity{0.5, 1.5}, 0.5}, {Atom{0.3}, 0.5}})}) {
    RateTable table(m, 120);
    for (long b : {2L, 3L, 50L, 120L}) {
      const auto row = table.jump_row(b);
      const auto d = jump_distribution(m, b);
      for (long j = 2; j <= b; ++j) EXPECT_NEAR(row[j - 2], d(j), 1e-12 + 1e-10 * d(j)) << b << ' ' << j;
      EXPECT_NEAR(table.lambda_total(b), lambda_total(m, b), 1e-12 * lambda_total(m, b));
    }
  }
}

TEST(RateTable, SampleJumpIsInverseCdf) {
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 100);
  const auto row = table.jump_row(100);
  double cumulative = 0.0;
  for (long j = 2; j <= 12; ++j) {
    cumulative += row[j - 2];
    EXPECT_EQ(table.sample_jump(100, cumulative - 1e-9), j);
    EXPECT_EQ(table.sample_jump(100, cumulative + 1e-9), j + 1);
  }
  EXPECT_EQ(table.sample_jump(100, 0.0), 2);
  EXPECT_LE(table.sample_jump(100, 1.0 - 1e-16), 100);
}

TEST(RateTable, RejectsOutOfRange) {
  RateTable table(LambdaMeasure::lebesgue(), 10);
  EXPECT_THROW(table.jump_row(11), DomainError);
  EXPECT_THROW(table.lambda_total(1), DomainError);
}

TEST(MeanJump, Kingman) {
  for (long b : {2L, 5L, 40L}) EXPECT_NEAR(mean_jump_minus_one(LambdaMeasure::kingman(), b), 1.0, 1e-14);
}

TEST(MeanJump, ExampleMeasure) {
  const double alpha = 0.5;
  const double v = mean_jump_minus_one(LambdaMeasure::truncated_limit_example(alpha), 100);
  EXPECT_GE(v, 1.85);
  EXPECT_LE(v, 1.95);
  const double leading = 2.0 - std::pow(100.0, alpha - 1.0) / ((1.0 - alpha) * std::tgamma(alpha));
  EXPECT_NEAR(v, leading, 0.02);
}

TEST(MeanJump, BetaLimit) {
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 10000);
  EXPECT_NEAR(table.mean_jump_minus_one(10000), 2.0, 0.02);
  EXPECT_NEAR(mean_jump_minus_one(LambdaMeasure::beta(0.5, 1.5), 1000), table.mean_jump_minus_one(1000), 1e-12);
}

TEST(MeanJump, BetaExactValue) {
  // Independent oracle: 30-digit evaluation of sum_j (j-1) C(b,j) B(j-3/2, b-j+3/2) / sum_j C(b,j) B(j-3/2, b-j+3/2).
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 10000);
  EXPECT_NEAR(table.mean_jump_minus_one(10000), 1.97371023092233548, 1e-12);
}

TEST(MeanJump, RateFittedAtThousandHoldsAtHundredThousand) {
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 100000);
  const double c = std::abs(table.mean_jump_minus_one(1000) - 2.0) * std::pow(1000.0, 0.5);
  EXPECT_LE(std::abs(table.mean_jump_minus_one(100000) - 2.0), 1.1 * c * std::pow(1e5, -0.5));
}

TEST(TailSum, Examples) {
  EXPECT_NEAR(tail_sum(LambdaMeasure::lebesgue(), 3, 3, 3), 0.5, 1e-14);
  for (long b : {5L, 40L}) {
    EXPECT_NEAR(tail_sum(LambdaMeasure::beta(0.5, 1.5), b, 2, b), lambda_total(LambdaMeasure::beta(0.5, 1.5), b),
                1e-10 * b * b);
  }
  EXPECT_THROW(tail_sum(LambdaMeasure::lebesgue(), 5, 4, 3), DomainError);
}

TEST(TailSum, LeadingTermAtLargeB) {
  const double alpha = 0.5, A = 4.0 / std::numbers::pi;
  const long b = 10000, m = 100;
  const double lead = A * alpha / (2.0 - alpha) * std::exp(std::lgamma(m + alpha - 2.0) - std::lgamma(m)) *
                      std::pow(static_cast<double>(b), 2.0 - alpha);
  EXPECT_NEAR(tail_sum(LambdaMeasure::beta(0.5, 1.5), b, m, b) / lead, 1.0, 0.1);
}

// Telescoped tails of the limit law: T(n) = sum_{j >= n} q(j) = Gamma(n+alpha-2) / (Gamma(alpha) Gamma(n)), and
// sum_{n >= N+1} T(n) = Gamma(N+alpha-1) / ((1-alpha) Gamma(alpha) Gamma(N)).
double limit_tail(double alpha, double n) {
  return std::exp(std::lgamma(n + alpha - 2.0) - std::lgamma(alpha) - std::lgamma(n));
}

TEST(LimitPmf, Values) {
  EXPECT_NEAR(limit_jump_pmf(0.5, 2), 0.75, 1e-15);
  for (double alpha : {0.2, 0.5, 0.9}) {
    CompensatedSum mass;
    for (long j = 2; j <= 10000; ++j) mass += limit_jump_pmf(alpha, j);
    EXPECT_NEAR(mass.value() + limit_tail(alpha, 10001.0), 1.0, 1e-12);
  }
  // The truncated sum alone misses exactly that tail.
  CompensatedSum mass;
  for (long j = 2; j <= 10000; ++j) mass += limit_jump_pmf(0.2, j);
  EXPECT_NEAR(mass.value(), 1.0, 1.01 * limit_tail(0.2, 10001.0));
  EXPECT_THROW(limit_jump_pmf(1.0, 2), DomainError);
}

TEST(LimitPmf, MeanIsOneOverOneMinusAlpha) {
  for (double alpha : {0.3, 0.5, 0.8}) {
    const long J = 10000;
    CompensatedSum mean;
    for (long j = 2; j <= J; ++j) mean += (j - 1.0) * limit_jump_pmf(alpha, j);
    const double tail = (J - 1.0) * limit_tail(alpha, J + 1.0) +
                        std::exp(std::lgamma(J + alpha - 1.0) - std::lgamma(alpha) - std::lgamma(static_cast<double>(J))) /
                            (1.0 - alpha);
    EXPECT_NEAR(mean.value() + tail, 1.0 / (1.0 - alpha), 1e-10) << alpha;
  }
}

TEST(JumpCf, Basics) {
  const auto v = jump_cf(LambdaMeasure::beta(0.5, 1.5), 50, 0.0);
  EXPECT_NEAR(v.real(), 1.0, 1e-14);
  EXPECT_NEAR(v.imag(), 0.0, 1e-14);
  for (double u : {0.3, 1.0, 4.0}) {
    const auto k = jump_cf(LambdaMeasure::kingman(), 12, u);
    EXPECT_NEAR(std::abs(k - std::polar(1.0, u)), 0.0, 1e-14);
    EXPECT_LE(std::abs(jump_cf(LambdaMeasure::beta(0.5, 1.5), 80, u)), 1.0 + 1e-14);
  }
}

TEST(JumpCf, ExpansionAtLargeN) {
  const double alpha = 0.5, s = 1.0, m = 100.0;
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 1000000);
  const auto q = table.jump_row(1000000);
  const auto phi = jump_cf(JumpDistribution{1000000, q}, s / m);
  const std::complex<double> omega = std::polar(1.0, std::numbers::pi * alpha / 2.0);
  const auto expansion = 1.0 + std::complex<double>(0.0, s / ((1.0 - alpha) * m)) -
                         omega * std::pow(s, 2.0 - alpha) / ((1.0 - alpha) * std::pow(m, 2.0 - alpha));
  EXPECT_LT(std::abs(phi - expansion), 0.1 * std::pow(s, 2.0 - alpha) / ((1.0 - alpha) * std::pow(m, 2.0 - alpha)));
}

TEST(LimitResiduals, TotalRateAndPmfResidualsShrink) {
  const double alpha = 0.5, A = 4.0 / std::numbers::pi;
  RateTable table(LambdaMeasure::beta(0.5, 1.5), 100000);
  double prev_rate = 1e300, prev_pmf = 1e300;
  for (long n : {100L, 1000L, 10000L, 100000L}) {
    const double rate = std::abs(table.lambda_total(n) * std::pow(n, alpha - 2.0) -
                                 A * std::tgamma(alpha + 1.0) / (2.0 - alpha));
    const auto q = table.jump_row(n);
    double pmf = 0.0;
    for (long j = 2; j <= 6; ++j) pmf = std::max(pmf, std::abs(q[j - 2] - limit_jump_pmf(alpha, j)));
    EXPECT_LE(rate, 1.05 * prev_rate) << n;
    EXPECT_LE(pmf, 1.05 * prev_pmf) << n;
    prev_rate = rate;
    prev_pmf = pmf;
  }
}
