#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "coalcol/bounds.hpp"
#include "coalcol/parallel.hpp"

using namespace coalcol;

namespace {

constexpr BoundParams kExample{0.40, 0.82, 0.893, 0.99};

const RateTable& beta_table() {
  static const RateTable table(LambdaMeasure::beta(0.5, 1.5), 100000);
  return table;
}

long example_k(long n) { return floor_power(n, 0.99); }

}  // namespace

TEST(Params, ExampleIsFeasible) {
  EXPECT_TRUE(satisfies_constraints(kExample, 0.5, 1.0, ConstraintSet::dominance));
  EXPECT_TRUE(satisfies_constraints(kExample, 0.5, 1.0, ConstraintSet::stable_limit));
  EXPECT_NO_THROW(require_feasible(kExample, 0.5, 1.0, ConstraintSet::stable_limit));
}

TEST(Params, SmallVarsigmaIsInfeasible) {
  EXPECT_THROW(find_feasible_params(0.5, 0.2, ConstraintSet::stable_limit), InfeasibleParams);
  try {
    find_feasible_params(0.5, 0.2, ConstraintSet::stable_limit);
  } catch (const InfeasibleParams& e) {
    EXPECT_NE(std::string(e.what()).find("varsigma"), std::string::npos);
  }
}

TEST(Params, UpsilonOneRejected) {
  for (double alpha : {0.2, 0.5, 0.8}) {
    const BoundParams p{0.1, 0.5, 0.7, 1.0};
    EXPECT_FALSE(satisfies_constraints(p, alpha, 1.0, ConstraintSet::dominance));
    EXPECT_THROW(require_feasible(p, alpha, 1.0, ConstraintSet::dominance), InfeasibleParams);
  }
}

TEST(Params, SearchReturnsInteriorPoint) {
  for (double alpha : {0.3, 0.5, 0.7}) {
    for (auto set : {ConstraintSet::dominance, ConstraintSet::stable_limit}) {
      const double varsigma = 1.0;
      const auto p = find_feasible_params(alpha, varsigma, set);
      EXPECT_TRUE(satisfies_constraints(p, alpha, varsigma, set)) << alpha;
      EXPECT_GE(minimum_slack(evaluate_constraints(p, alpha, varsigma, set)), kFeasibilitySlack) << alpha;
    }
  }
  EXPECT_THROW(find_feasible_params(1.0, 1.0, ConstraintSet::dominance), DomainError);
}

TEST(Params, JsonRoundTrip) {
  const auto back = BoundParams::from_json(kExample.to_json());
  EXPECT_EQ(back.gamma, kExample.gamma);
  EXPECT_EQ(back.upsilon, kExample.upsilon);
}

TEST(FloorPower, ExactPowers) {
  EXPECT_EQ(floor_power(10000, 0.5), 100);
  EXPECT_EQ(floor_power(1000, 1.0 / 3.0), 10);
  EXPECT_EQ(floor_power(10000, 0.99), 9120);
}

TEST(BoundedLaws, SupportAndNormalization) {
  const long n = 10000, k = example_k(n);
  const auto laws = bounded_jump_laws(beta_table(), n, k, kExample);
  const long fb = floor_power(n, kExample.beta);
  const long ft = floor_power(n, kExample.theta);
  for (const auto* law : {&laws.plus, &laws.minus}) {
    double total = 0.0;
    for (double p : law->pmf) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_EQ(law->cdf.back(), 1.0);
    EXPECT_EQ(law->support.front(), 2);
  }
  EXPECT_EQ(laws.plus.support.back(), fb);
  EXPECT_EQ(laws.plus.probability(1), 0.0);
  EXPECT_EQ(laws.plus.probability(fb + 1), 0.0);
  EXPECT_EQ(laws.plus.probability(n), 0.0);
  for (long j : laws.minus.support) EXPECT_TRUE(j <= fb || j == ft || j == n) << j;
  EXPECT_GT(laws.minus.probability(n), 0.0);
  EXPECT_EQ(laws.minus.probability(ft + 1), 0.0);
  EXPECT_EQ(laws.minus.survival(2), 1.0);
  EXPECT_EQ(laws.minus.survival(n + 1), 0.0);
}

TEST(BoundedLaws, Geometry) {
  const RateTable table(LambdaMeasure::beta(0.5, 1.5), 200);
  // floor(10^0.82) = floor(10^0.83) = 6: the atom would fall inside the body.
  EXPECT_THROW(bounded_jump_laws(table, 10, 9, {0.4, 0.82, 0.83, 0.99}), NotYetValid);
  EXPECT_THROW(bounded_jump_laws(table, 100, 20, kExample), DomainError);
  EXPECT_THROW(bounded_jump_laws(table, 300, 297, kExample), DomainError);
  EXPECT_THROW(bounded_jump_laws(table, 4, 4, kExample), NotYetValid);  // floor(4^0.82) = floor(4^0.893) = 3
  EXPECT_THROW(bounded_jump_laws(table, 3, 3, kExample), DomainError);   // floor(3^0.82) = 2 < 3
}

TEST(BoundedLaws, TailRatioMaximaScale) {
  // The maxima behave like c / n^{beta(2-alpha)} with constants bounded above and below.
  std::vector<double> scaled;
  for (long n : {1000L, 10000L, 100000L}) {
    const auto law = bounded_jump_law(beta_table(), n, example_k(n), kExample, BoundSide::minus);
    scaled.push_back(law.max_tail_beta * std::pow(static_cast<double>(n), kExample.beta * 1.5));
    EXPECT_GT(law.max_tail_beta, law.max_tail_theta);
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  EXPECT_GT(*lo, 0.0);
  EXPECT_LT(*hi / *lo, 2.0);
}

TEST(Dominance, HoldsAtTenThousand) {
  const long n = 10000, k = example_k(n);
  const auto report = verify_dominance(beta_table(), n, k, kExample);
  EXPECT_TRUE(report.verified);
  EXPECT_EQ(report.violations, 0);
  EXPECT_TRUE(report.witnesses.empty());
  EXPECT_EQ(report.states_checked, n - k + 1);
  EXPECT_GE(report.worst_slack, -kDominanceSlack);
}

TEST(Dominance, ReportJson) {
  const long n = 10000, k = example_k(n);
  const auto j = verify_dominance(beta_table(), n, k, kExample).to_json();
  for (const char* key : {"n", "k", "params", "verified", "witnesses"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["n"], n);
  EXPECT_EQ(j["params"]["theta"], kExample.theta);
  EXPECT_TRUE(j["witnesses"].is_array());
}

TEST(Dominance, HoldsAcrossParameterSweep) {
  // Once both laws are nonnegative the inequalities hold for every tried exponent set.
  const RateTable table(LambdaMeasure::beta(0.5, 1.5), 1000);
  int built = 0;
  for (double gamma : {0.05, 0.3, 0.6}) {
    for (const auto& [beta, theta] : {std::pair{0.5, 0.7}, std::pair{0.82, 0.893}}) {
      try {
        const auto report = verify_dominance(table, 1000, floor_power(1000, 0.95), {gamma, beta, theta, 0.99});
        EXPECT_TRUE(report.verified) << gamma << ' ' << beta;
        ++built;
      } catch (const NotYetValid&) {
      }
    }
  }
  EXPECT_GT(built, 0);
}

TEST(Dominance, WitnessesSerializeAsPairs) {
  DominanceReport report{100, 90, kExample, false, {{95, 7}, {100, 12}}, 2, 11, -1e-3};
  const auto j = report.to_json();
  EXPECT_FALSE(j["verified"].get<bool>());
  ASSERT_EQ(j["witnesses"].size(), 2u);
  EXPECT_EQ(j["witnesses"][1][0], 100);
  EXPECT_EQ(j["witnesses"][1][1], 12);
  EXPECT_EQ(j["violations"], 2);
}

TEST(Coupling, RequiresVerification) {
  const long n = 10000, k = example_k(n);
  CoupledJumps coupled(beta_table(), n, k, kExample);
  EXPECT_THROW(coupled.coupled_triple(n, 0.3), DominanceNotVerified);
  ASSERT_TRUE(coupled.verify().verified);
  EXPECT_THROW(coupled.coupled_triple(k - 1, 0.3), DomainError);
  const auto t = coupled.coupled_triple(n, 0.0);
  EXPECT_EQ(t.plus, 2);
  EXPECT_EQ(t.b, 2);
  EXPECT_EQ(t.minus, 2);
}

TEST(Coupling, OrderedOnEveryDraw) {
  const long n = 10000, k = example_k(n);
  CoupledJumps coupled(beta_table(), n, k, kExample);
  ASSERT_TRUE(coupled.verify().verified);
  const auto bad = parallel_map<long>(200000, [&](std::size_t i) {
    RngStream rng(51, i);
    const long b = k + static_cast<long>(rng.uniform() * static_cast<double>(n - k + 1));
    const auto t = coupled.coupled_triple(std::min(b, n), rng);
    return static_cast<long>(!(t.plus <= t.b && t.b <= t.minus));
  });
  EXPECT_EQ(std::count(bad.begin(), bad.end(), 1L), 0);
}

TEST(Coupling, MarginalIsJumpLaw) {
  const long n = 10000, k = example_k(n);
  CoupledJumps coupled(beta_table(), n, k, kExample);
  for (double u : {0.01, 0.3, 0.7, 0.95, 0.999}) EXPECT_EQ(coupled.jump_quantile(n, u), beta_table().sample_jump(n, u)) << u;
}

TEST(MeanOrdering, AllStates) {
  const long n = 10000, k = example_k(n);
  const auto laws = bounded_jump_laws(beta_table(), n, k, kExample);
  const double lo = laws.plus.mean_minus_one();
  const double hi = laws.minus.mean_minus_one();
  for (long b = k; b <= n; ++b) {
    const double m = beta_table().mean_jump_minus_one(b);
    ASSERT_LE(lo, m) << b;
    ASSERT_LE(m, hi) << b;
  }
}

TEST(MeanGap, TrendCheck) {
  const long n = 10000, k = example_k(n);
  const auto check = mean_gap_check(beta_table(), 0.5, n, k, kExample, 1000);
  EXPECT_TRUE(check.passed);
  EXPECT_LE(check.gap_minus, 10.0 * check.bound_minus);
  EXPECT_LE(check.gap_plus, 10.0 * check.bound_plus);
  EXPECT_EQ(check.k_fit, floor_power(1000, std::log(static_cast<double>(k)) / std::log(1e4)));
}

TEST(MeanGap, RateExpressions) {
  const double r = mean_gap_rate_minus(10000, 0.5, kExample);
  EXPECT_NEAR(r, std::max({std::pow(1e4, -0.4), std::pow(1e4, -0.41), std::pow(1e4, 0.893 - 1.23),
                           std::pow(1e4, 1.0 - 0.893 * 1.5)}),
              1e-15);
  EXPECT_NEAR(mean_gap_rate_plus(10000, 0.5, kExample), std::pow(1e4, -0.4), 1e-15);
}

TEST(TailMean, ApproachesAsymptote) {
  // The ratio to the leading term converges slowly from below.
  double prev = 0.0;
  for (long n : {1000L, 10000L, 100000L}) {
    const double ratio =
        tail_mean(beta_table(), n, example_k(n), kExample.beta) / tail_mean_asymptote(n, 0.5, kExample.beta);
    EXPECT_GT(ratio, prev) << n;
    EXPECT_LT(ratio, 1.0) << n;
    prev = ratio;
  }
  EXPECT_GT(prev, 0.3);
}

TEST(SumAndHit, HitOneIsOneStep) {
  const long n = 10000, k = example_k(n);
  const auto laws = bounded_jump_laws(beta_table(), n, k, kExample);
  for (std::uint64_t r = 0; r < 100; ++r) {
    RngStream rng(60, r);
    EXPECT_EQ(bounded_sum_and_hit(laws.minus, 1, SumMode::hit_ell, rng), 1);
    EXPECT_EQ(bounded_sum_and_hit(laws.plus, 1, SumMode::hit_ell, rng), 1);
  }
  RngStream rng(61, 0);
  EXPECT_THROW(bounded_sum_and_hit(laws.plus, 0, SumMode::sum_h, rng), DomainError);
}

TEST(SumAndHit, Duality) {
  // P[C_d <= h] = P[S_h >= d], estimated from independent streams.
  const long n = 10000, k = example_k(n);
  const long d = n - k;
  const auto laws = bounded_jump_laws(beta_table(), n, k, kExample);
  constexpr std::size_t kReps = 4000;
  for (const auto* law : {&laws.plus, &laws.minus}) {
    const double mean = law->mean_minus_one();
    const long centre = std::lround(static_cast<double>(d) / mean);
    for (long h : {centre - 40, centre, centre + 40}) {
      const auto hits = parallel_map<long>(kReps, [&](std::size_t i) {
        RngStream rng(62, i);
        return static_cast<long>(bounded_sum_and_hit(*law, d, SumMode::hit_ell, rng) <= h);
      });
      const auto sums = parallel_map<long>(kReps, [&](std::size_t i) {
        RngStream rng(63, i);
        return static_cast<long>(bounded_sum_and_hit(*law, h, SumMode::sum_h, rng) >= d);
      });
      const double p1 = static_cast<double>(std::count(hits.begin(), hits.end(), 1L)) / kReps;
      const double p2 = static_cast<double>(std::count(sums.begin(), sums.end(), 1L)) / kReps;
      const double se = std::sqrt((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / kReps);
      EXPECT_LE(std::abs(p1 - p2), 4.0 * se + 1e-3) << to_string(law->side) << ' ' << h;
    }
  }
}

TEST(SumAndHit, PathwiseDuality) {
  // On a shared stream the identity {C_d <= h} = {S_h >= d} holds draw by draw.
  const long n = 10000, k = example_k(n);
  const auto law = bounded_jump_law(beta_table(), n, k, kExample, BoundSide::minus);
  for (std::uint64_t r = 0; r < 200; ++r) {
    RngStream a(64, r);
    const long c = bounded_sum_and_hit(law, 500, SumMode::hit_ell, a);
    for (long h : {c - 1, c}) {
      RngStream s(64, r);
      if (h < 1) continue;
      EXPECT_EQ(bounded_sum_and_hit(law, h, SumMode::sum_h, s) >= 500, h >= c);
    }
  }
}

TEST(SumAndHit, Normalization) {
  EXPECT_DOUBLE_EQ(normalize_bounded_sum(20000, 10000, 0.5), 0.0);
  EXPECT_NEAR(normalize_bounded_sum(20000 + 400, 10000, 0.5), 400.0 / std::pow(20000.0, 2.0 / 3.0), 1e-12);
}
