#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coalcol/error.hpp"
#include "coalcol/parallel.hpp"
#include "coalcol/random.hpp"
#include "coalcol/rates.hpp"
#include "coalcol/stats.hpp"

namespace coalcol {

inline constexpr long kDefaultMaxExact = 5000;
inline constexpr long kDefaultMaxDistribution = 300;

// Outcome of running the block-counting chain from n until it first enters
// {1, ..., k}: the number of collisions and the state it lands in.
struct DescentResult {
  long collisions = 0;
  long landing_state = 0;
  std::vector<long> trace;
};

// Green kernel g(n, b) = P(chain from n ever visits b), stored at index b.
struct GreenKernel {
  long n;
  std::vector<double> g;

  double operator()(long b) const { return g.at(static_cast<std::size_t>(b)); }
};

struct CollisionMoments {
  double mean;
  double second_moment;

  double variance() const { return second_moment - mean * mean; }
};

// Law of C_n; pmf[c] = P(C_n = c) for c = 0..n-1 (pmf[0] > 0 only for n = 1).
struct CollisionPmf {
  long n;
  std::vector<double> pmf;

  double mean() const {
    CompensatedSum s;
    for (std::size_t c = 0; c < pmf.size(); ++c) s += static_cast<double>(c) * pmf[c];
    return s.value();
  }
  double variance() const {
    CompensatedSum s;
    const double mu = mean();
    for (std::size_t c = 0; c < pmf.size(); ++c) {
      const double d = static_cast<double>(c) - mu;
      s += d * d * pmf[c];
    }
    return s.value();
  }
};

inline DescentResult simulate_descent(const RateTable& table, long n, long k, RngStream& rng,
                                      bool record_trace = false) {
  if (n < 1 || k < 1 || k > n) throw DomainError("simulate_descent: need 1 <= k <= n");
  if (n > table.b_max()) throw DomainError("simulate_descent: n exceeds rate table range");
  DescentResult result;
  long state = n;
  if (record_trace) result.trace.push_back(state);
  while (state > k) {
    const long j = table.sample_jump(state, rng.uniform());
    state -= j - 1;
    ++result.collisions;
    if (record_trace) result.trace.push_back(state);
  }
  result.landing_state = state;
  return result;
}

inline long simulate_collisions(const RateTable& table, long n, RngStream& rng) {
  return simulate_descent(table, n, 1, rng).collisions;
}

// Forward mass propagation: v(n) = 1, then v(s - j + 1) += v(s) q_s(j) for s = n..2.
inline GreenKernel green_kernel(const RateTable& table, long n, long n_max_exact = kDefaultMaxExact) {
  if (n < 1) throw DomainError("green_kernel: n must be positive");
  if (n > n_max_exact) throw ResourceLimit("green_kernel: n exceeds n_max_exact");
  GreenKernel kernel{n, std::vector<double>(static_cast<std::size_t>(n + 1), 0.0)};
  kernel.g[static_cast<std::size_t>(n)] = 1.0;
  for (long s = n; s >= 2; --s) {
    const double mass = kernel.g[static_cast<std::size_t>(s)];
    if (mass == 0.0) continue;
    const auto row = table.jump_row(s);
    for (long j = 2; j <= s; ++j) {
      kernel.g[static_cast<std::size_t>(s - j + 1)] += mass * row[static_cast<std::size_t>(j - 2)];
    }
  }
  return kernel;
}

// E[C_b] for b = 0..n via the first-step recursion E[C_b] = 1 + sum_j q_b(j) E[C_{b-j+1}].
inline std::vector<double> expected_collisions_all(const RateTable& table, long n) {
  std::vector<double> mean(static_cast<std::size_t>(n + 1), 0.0);
  for (long b = 2; b <= n; ++b) {
    const auto row = table.jump_row(b);
    CompensatedSum s;
    s += 1.0;
    for (long j = 2; j <= b; ++j) {
      s += row[static_cast<std::size_t>(j - 2)] * mean[static_cast<std::size_t>(b - j + 1)];
    }
    mean[static_cast<std::size_t>(b)] = s.value();
  }
  return mean;
}

// First two moments of C_n from the Green kernel:
//   E[C_n] = sum_{b>=2} g(n,b),  E[C_n^2] = sum_{b>=2} g(n,b) (1 + 2 sum_{2<=j<b} g(b,j)),
// where sum_{2<=j<b} g(b,j) = E[C_b] - 1.
inline CollisionMoments exact_moments(const RateTable& table, long n, long n_max_exact = kDefaultMaxExact) {
  if (n < 1) throw DomainError("exact_moments: n must be positive");
  if (n > n_max_exact) throw ResourceLimit("exact_moments: n exceeds n_max_exact");
  if (n == 1) return {0.0, 0.0};
  const GreenKernel kernel = green_kernel(table, n, n_max_exact);
  const auto mean_all = expected_collisions_all(table, n);
  CompensatedSum first;
  CompensatedSum second;
  for (long b = 2; b <= n; ++b) {
    const double g = kernel(b);
    first += g;
    second += g * (1.0 + 2.0 * (mean_all[static_cast<std::size_t>(b)] - 1.0));
  }
  return {first.value(), second.value()};
}

inline CollisionPmf exact_distribution(const RateTable& table, long n, long cap = kDefaultMaxDistribution) {
  if (n < 1) throw DomainError("exact_distribution: n must be positive");
  if (n > cap) throw ResourceLimit("exact_distribution: n exceeds cap " + std::to_string(cap));
  // law[b][c] = P(C_b = c).
  std::vector<std::vector<double>> law(static_cast<std::size_t>(n + 1));
  law[1] = {1.0};
  for (long b = 2; b <= n; ++b) {
    const auto row = table.jump_row(b);
    std::vector<double> p(static_cast<std::size_t>(b), 0.0);
    for (long j = 2; j <= b; ++j) {
      const double q = row[static_cast<std::size_t>(j - 2)];
      const auto& next = law[static_cast<std::size_t>(b - j + 1)];
      for (std::size_t c = 0; c < next.size(); ++c) p[c + 1] += q * next[c];
    }
    law[static_cast<std::size_t>(b)] = std::move(p);
  }
  return {n, std::move(law[static_cast<std::size_t>(n)])};
}

// Joint law of (C_{n|k}, B_{n,k}): joint[c][s] = P(c collisions, landing in s).
inline std::vector<std::vector<double>> exact_descent_distribution(const RateTable& table, long n, long k,
                                                                   long cap = kDefaultMaxDistribution) {
  if (n < 1 || k < 1 || k > n) throw DomainError("exact_descent_distribution: need 1 <= k <= n");
  if (n > cap) throw ResourceLimit("exact_descent_distribution: n exceeds cap");
  std::vector<std::vector<double>> joint(static_cast<std::size_t>(n + 1),
                                         std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
  if (n <= k) {
    joint[0][static_cast<std::size_t>(n)] = 1.0;
    return joint;
  }
  // occupancy[s][c] = P(visit s after exactly c collisions), s > k.
  std::vector<std::vector<double>> occupancy(static_cast<std::size_t>(n + 1),
                                             std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
  occupancy[static_cast<std::size_t>(n)][0] = 1.0;
  for (long s = n; s > k; --s) {
    const auto row = table.jump_row(s);
    const auto& here = occupancy[static_cast<std::size_t>(s)];
    for (long c = 0; c < n; ++c) {
      const double mass = here[static_cast<std::size_t>(c)];
      if (mass == 0.0) continue;
      for (long j = 2; j <= s; ++j) {
        const long to = s - j + 1;
        const double p = mass * row[static_cast<std::size_t>(j - 2)];
        if (to > k) {
          occupancy[static_cast<std::size_t>(to)][static_cast<std::size_t>(c + 1)] += p;
        } else {
          joint[static_cast<std::size_t>(c + 1)][static_cast<std::size_t>(to)] += p;
        }
      }
    }
  }
  return joint;
}

struct DecompositionSamples {
  std::vector<double> direct;
  std::vector<double> segmented;
};

// Samples C_n directly and as a sum of independent segment counts
// C_{n|k1} + C_{B|k2} + ... + C_{B|1}, each segment restarted on a fresh stream.
inline DecompositionSamples decomposition_samples(const RateTable& table, long n, std::vector<long> cuts,
                                                  std::uint64_t seed, std::size_t replicates) {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i] >= n || cuts[i] < 1 || (i > 0 && cuts[i] >= cuts[i - 1])) {
      throw DomainError("cut points must be strictly decreasing and below n");
    }
  }
  if (cuts.empty() || cuts.back() != 1) cuts.push_back(1);
  DecompositionSamples out;
  out.direct = parallel_map<double>(replicates, [&](std::size_t r) {
    RngStream rng(seed, 2 * r);
    return static_cast<double>(simulate_collisions(table, n, rng));
  });
  out.segmented = parallel_map<double>(replicates, [&](std::size_t r) {
    long state = n;
    long total = 0;
    for (std::size_t s = 0; s < cuts.size(); ++s) {
      RngStream rng(seed ^ splitmix64(s + 1), 2 * r + 1);
      const long k = std::min(cuts[s], state);
      const auto seg = simulate_descent(table, state, k, rng);
      total += seg.collisions;
      state = seg.landing_state;
    }
    return static_cast<double>(total);
  });
  return out;
}

// Two-sample KS test of C_n against the segmented sum at the given level.
inline bool iterated_decomposition_check(const RateTable& table, long n, const std::vector<long>& cuts,
                                         std::uint64_t seed, std::size_t replicates = 10000,
                                         double level = 0.01) {
  const auto samples = decomposition_samples(table, n, cuts, seed, replicates);
  const double d = ks_two_sample(samples.direct, samples.segmented);
  return d <= ks_two_sample_critical(samples.direct.size(), samples.segmented.size(), level);
}

}  // namespace coalcol
