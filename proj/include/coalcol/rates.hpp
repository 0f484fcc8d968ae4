#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "coalcol/error.hpp"
#include "coalcol/measure.hpp"
#include "coalcol/quadrature.hpp"
#include "coalcol/special.hpp"

namespace coalcol {

// Log-rates lambda_{b,j}, j = 2..b, of a single state b. Index 0 holds j = 2.
struct RateRow {
  long b;
  std::vector<double> log_lambda_bj;
  double lambda_b;
};

// q_b(j), j = 2..b. Index 0 holds j = 2.
struct JumpDistribution {
  long b;
  std::vector<double> pmf;

  double operator()(long j) const { return (j < 2 || j > b) ? 0.0 : pmf[static_cast<std::size_t>(j - 2)]; }
  double mean_minus_one() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < pmf.size(); ++i) s += static_cast<double>(i + 1) * pmf[i];
    return s.value();
  }
};

namespace detail {

// C(b,j) B(a+j-2, c+b-j) / B(a,c), each gamma quotient taken as a ratio so
// that large b keeps full relative precision.
inline double beta_rate(const BetaDensity& d, long b, long j) {
  using boost::math::tgamma_delta_ratio;
  const double bd = static_cast<double>(b);
  const double jd = static_cast<double>(j);
  return tgamma_delta_ratio(bd + 1.0, d.a + d.c - 3.0) * tgamma_delta_ratio(d.a + jd - 2.0, 3.0 - d.a) *
         tgamma_delta_ratio(d.c + bd - jd, 1.0 - d.c) / (tgamma_delta_ratio(d.a, d.c) * std::tgamma(d.c));
}

inline double atom_rate(const Atom& atom, long b, long j) {
  if (atom.x == 0.0) return j == 2 ? 0.5 * static_cast<double>(b) * static_cast<double>(b - 1) : 0.0;
  if (atom.x == 1.0) return j == b ? 1.0 : 0.0;
  return std::exp(log_choose(b, j) + static_cast<double>(j - 2) * std::log(atom.x) +
                  static_cast<double>(b - j) * std::log1p(-atom.x));
}

inline double general_rate(const GeneralDensity& d, long b, long j) {
  const double bd = static_cast<double>(b);
  const double mode = b > 2 ? static_cast<double>(j - 2) / (bd - 2.0) : 0.0;
  const double width = std::sqrt(mode * (1.0 - mode) / bd) + 1.0 / bd;
  std::vector<double> breaks;
  for (double k : {-12.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0}) breaks.push_back(mode + k * width);
  const double log_c = log_choose(b, j);
  auto kernel = [=](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::exp(log_c + static_cast<double>(j - 2) * std::log(x) +
                    static_cast<double>(b - j) * std::log1p(-x));
  };
  return integrate_against_density(d, kernel, breaks, {1e-12, 1e-12, 10000});
}

}  // namespace detail

// lambda_{b,j} = C(b,j) * integral of x^{j-2} (1-x)^{b-j} against the measure.
inline double lambda_bj(const LambdaMeasure& measure, long b, long j) {
  if (b < 2 || j < 2 || j > b) throw DomainError("lambda_bj: need 2 <= j <= b");
  CompensatedSum sum;
  for (const auto& c : measure.components()) {
    if (c.weight == 0.0) continue;
    if (const auto* beta = std::get_if<BetaDensity>(&c.kind)) {
      sum += c.weight * detail::beta_rate(*beta, b, j);
    } else if (const auto* atom = std::get_if<Atom>(&c.kind)) {
      sum += c.weight * detail::atom_rate(*atom, b, j);
    } else {
      sum += c.weight * detail::general_rate(std::get<GeneralDensity>(c.kind), b, j);
    }
  }
  return sum.value();
}

// lambda_b by the moment sum  sum_{i=1}^{b-1} i nu_{i-1}.
inline double lambda_total_from_moments(const LambdaMeasure& measure, long b) {
  if (b < 2) throw DomainError("lambda_total: b must be at least 2");
  CompensatedSum sum;
  for (long i = 1; i < b; ++i) sum += static_cast<double>(i) * nu(measure, i - 1);
  return sum.value();
}

inline constexpr double kRateConsistencyTol = 1e-10;

inline RateRow rate_row(const LambdaMeasure& measure, long b) {
  if (b < 2) throw DomainError("rate_row: b must be at least 2");
  RateRow row{b, {}, lambda_total_from_moments(measure, b)};
  row.log_lambda_bj.reserve(static_cast<std::size_t>(b - 1));
  CompensatedSum direct;
  for (long j = 2; j <= b; ++j) {
    const double rate = lambda_bj(measure, b, j);
    direct += rate;
    row.log_lambda_bj.push_back(rate > 0.0 ? std::log(rate) : -std::numeric_limits<double>::infinity());
  }
  if (relative_difference(direct.value(), row.lambda_b) > kRateConsistencyTol) {
    throw ConsistencyError("total rate mismatch at b=" + std::to_string(b) + ": moment sum " +
                           std::to_string(row.lambda_b) + " vs rate sum " + std::to_string(direct.value()));
  }
  return row;
}

// Total collision rate; the moment-sum value is returned after it is checked
// against the direct sum of lambda_{b,j}.
inline double lambda_total(const LambdaMeasure& measure, long b) { return rate_row(measure, b).lambda_b; }

// Alternating finite-difference route from the moments nu_0, nu_1, ...
// Cancellation grows like 2^j, so it is only offered as an oracle for b <= 40.
inline double rates_from_nu_alternating(std::span<const double> nu_values, long b, long j) {
  if (b > 40) throw DomainError("rates_from_nu_alternating: unstable for b > 40");
  if (b < 2 || j < 2 || j > b) throw DomainError("rates_from_nu_alternating: need 2 <= j <= b");
  if (nu_values.size() < static_cast<std::size_t>(b - 1)) {
    throw DomainError("rates_from_nu_alternating: need nu_0 .. nu_{b-2}");
  }
  double sum = 0.0;
  for (long s = 0; s <= j - 2; ++s) {
    const double sign = ((j - s) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * std::round(choose(j - 2, s)) * nu_values[static_cast<std::size_t>(b - 2 - s)];
  }
  return std::round(choose(b, j)) * sum;
}

inline JumpDistribution jump_distribution(const LambdaMeasure& measure, long b) {
  const RateRow row = rate_row(measure, b);
  JumpDistribution dist{b, {}};
  dist.pmf.reserve(row.log_lambda_bj.size());
  CompensatedSum total;
  for (double lr : row.log_lambda_bj) total += std::exp(lr);
  for (double lr : row.log_lambda_bj) dist.pmf.push_back(std::exp(lr) / total.value());
  return dist;
}

// E[J_b - 1] = b * sum nu_{i-1} / sum i nu_{i-1} - 1, checked against the pmf mean.
inline double mean_jump_minus_one(const LambdaMeasure& measure, long b) {
  if (b < 2) throw DomainError("mean_jump_minus_one: b must be at least 2");
  CompensatedSum plain;
  CompensatedSum weighted;
  for (long i = 1; i < b; ++i) {
    const double v = nu(measure, i - 1);
    plain += v;
    weighted += static_cast<double>(i) * v;
  }
  const double by_moments =
      static_cast<double>(b) * (plain.value() / weighted.value()) - 1.0;
  const double by_pmf = jump_distribution(measure, b).mean_minus_one();
  if (relative_difference(by_moments, by_pmf) > kRateConsistencyTol) {
    throw ConsistencyError("mean jump mismatch at b=" + std::to_string(b));
  }
  return by_moments;
}

namespace detail {

// m C(b,m) * integral of x^{m-1} (1-x)^{b-m} G_{-2}(x) dx, in log-x coordinates.
inline double telescoped_tail(const LambdaMeasure& measure, long b, long m) {
  const double mode = std::max(static_cast<double>(m - 1) / static_cast<double>(b - 1), 1e-300);
  const double s_mode = std::log(mode);
  const double spread = 1.0 / std::sqrt(static_cast<double>(m));
  const double s_lo = s_mode - 50.0;
  std::vector<double> breaks;
  for (double s = s_lo; s < 0.0; s += 0.5) breaks.push_back(s);
  for (double k = -12.0; k <= 12.0; k += 0.5) {
    const double s = s_mode + k * spread;
    if (s > s_lo && s < 0.0) breaks.push_back(s);
  }
  breaks.push_back(0.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double log_front = std::log(static_cast<double>(m)) + log_choose(b, m);
  auto f = [&](double s) {
    const double x = std::exp(s);
    if (x >= 1.0) return 0.0;
    const double g = truncated_moment(measure, x, -2);
    if (g <= 0.0) return 0.0;
    return std::exp(log_front + s * static_cast<double>(m) +
                    static_cast<double>(b - m) * std::log1p(-x) + std::log(g));
  };
  return quad::integrate(f, std::span<const double>(breaks), {0.0, 1e-11, 10000}).value;
}

}  // namespace detail

// lambda_b(m:k) = sum_{j=m}^{k} lambda_{b,j}. For k = b the sum is also
// obtained from the telescoped integral against G_{-2} and both must agree.
inline double tail_sum(const LambdaMeasure& measure, long b, long m, long k) {
  if (!(2 <= m && m <= k && k <= b)) throw DomainError("tail_sum: need 2 <= m <= k <= b");
  CompensatedSum direct;
  for (long j = m; j <= k; ++j) direct += lambda_bj(measure, b, j);
  if (k == b && measure.atom_mass_at(0.0) == 0.0) {
    const double telescoped = detail::telescoped_tail(measure, b, m);
    if (relative_difference(telescoped, direct.value()) > 1e-8) {
      throw ConsistencyError("tail sum routes disagree at b=" + std::to_string(b) + ", m=" +
                             std::to_string(m) + ": " + std::to_string(direct.value()) + " vs " +
                             std::to_string(telescoped));
    }
  }
  return direct.value();
}

// Limit of q_n(j) as n -> infinity: (2-alpha) (alpha)_{j-2} / j!.
inline double limit_jump_pmf(double alpha, long j) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("limit_jump_pmf: need 0 < alpha < 1");
  if (j < 2) throw DomainError("limit_jump_pmf: need j >= 2");
  const double jd = static_cast<double>(j);
  return (2.0 - alpha) * boost::math::tgamma_ratio(alpha + jd - 2.0, jd + 1.0) / std::tgamma(alpha);
}

// E[exp(i u (J_n - 1))].
inline std::complex<double> jump_cf(const JumpDistribution& dist, double u) {
  CompensatedSum re;
  CompensatedSum im;
  for (std::size_t i = 0; i < dist.pmf.size(); ++i) {
    const double phase = u * static_cast<double>(i + 1);
    re += dist.pmf[i] * std::cos(phase);
    im += dist.pmf[i] * std::sin(phase);
  }
  return {re.value(), im.value()};
}

inline std::complex<double> jump_cf(const LambdaMeasure& measure, long n, double u) {
  if (n < 2) throw DomainError("jump_cf: n must be at least 2");
  return jump_cf(jump_distribution(measure, n), u);
}

// Precomputed moments and total rates for all states up to b_max, with lazy
// generation of rate rows. Immutable after construction apart from the
// write-once row memo used for general densities.
class RateTable {
 public:
  static constexpr long kGeneralDensityCap = 5000;

  RateTable(LambdaMeasure measure, long b_max) : measure_(std::move(measure)), b_max_(b_max) {
    if (b_max_ < 2) throw DomainError("RateTable: b_max must be at least 2");
    if (measure_.has_general_density() && b_max_ > kGeneralDensityCap) {
      throw ResourceLimit("general-density measures are limited to b <= " +
                          std::to_string(kGeneralDensityCap));
    }
    for (const auto& c : measure_.components()) {
      if (c.weight == 0.0) continue;
      if (const auto* beta = std::get_if<BetaDensity>(&c.kind)) {
        BetaTerm t{c.weight, beta->a, beta->c, {}};
        t.nu.resize(static_cast<std::size_t>(b_max_));
        for (long i = 0; i < b_max_; ++i) t.nu[static_cast<std::size_t>(i)] = beta_nu(*beta, static_cast<double>(i));
        betas_.push_back(std::move(t));
      } else if (const auto* atom = std::get_if<Atom>(&c.kind)) {
        if (atom->x == 0.0) {
          atom0_ += c.weight;
        } else if (atom->x == 1.0) {
          atom1_ += c.weight;
        } else {
          interior_atoms_.push_back({c.weight, atom->x});
        }
      } else {
        has_general_ = true;
      }
    }
    nu_.resize(static_cast<std::size_t>(b_max_));
    for (long i = 0; i < b_max_; ++i) nu_[static_cast<std::size_t>(i)] = coalcol::nu(measure_, i);
    lambda_.assign(static_cast<std::size_t>(b_max_ + 1), 0.0);
    CompensatedSum running;
    for (long b = 2; b <= b_max_; ++b) {
      running += static_cast<double>(b - 1) * nu_[static_cast<std::size_t>(b - 2)];
      lambda_[static_cast<std::size_t>(b)] = running.value();
    }
    if (has_general_) {
      general_rows_.resize(static_cast<std::size_t>(b_max_ + 1));
      general_once_ = std::make_unique<std::once_flag[]>(static_cast<std::size_t>(b_max_ + 1));
    }
  }

  RateTable(const RateTable&) = delete;
  RateTable& operator=(const RateTable&) = delete;

  const LambdaMeasure& measure() const { return measure_; }
  long b_max() const { return b_max_; }
  double nu(long i) const { return nu_.at(static_cast<std::size_t>(i)); }
  double lambda_total(long b) const {
    check_state(b);
    return lambda_[static_cast<std::size_t>(b)];
  }

  // Calls visit(j, lambda_{b,j}) for j = 2, 3, ... until it returns false or j = b.
  template <class Visit>
  void for_each_rate(long b, Visit&& visit) const {
    check_state(b);
    const double bd = static_cast<double>(b);
    thread_local std::vector<double> beta_terms;
    thread_local std::vector<double> atom_logs;
    beta_terms.resize(betas_.size());
    atom_logs.resize(interior_atoms_.size());
    const double pairs = 0.5 * bd * (bd - 1.0);
    for (std::size_t i = 0; i < betas_.size(); ++i) {
      beta_terms[i] = betas_[i].weight * pairs * betas_[i].nu[static_cast<std::size_t>(b - 2)];
    }
    for (std::size_t i = 0; i < interior_atoms_.size(); ++i) {
      atom_logs[i] = std::log(pairs) + (bd - 2.0) * std::log1p(-interior_atoms_[i].x);
    }
    const std::vector<double>* general = has_general_ ? &general_row(b) : nullptr;
    for (long j = 2; j <= b; ++j) {
      double rate = 0.0;
      for (double t : beta_terms) rate += t;
      for (std::size_t i = 0; i < interior_atoms_.size(); ++i) {
        rate += interior_atoms_[i].weight * std::exp(atom_logs[i]);
      }
      if (j == 2) rate += atom0_ * pairs;
      if (j == b) rate += atom1_;
      if (general) rate += (*general)[static_cast<std::size_t>(j - 2)];
      if (!visit(j, rate)) return;
      if (j == b) return;
      const double jd = static_cast<double>(j);
      const double binomial_step = (bd - jd) / (jd + 1.0);
      for (std::size_t i = 0; i < betas_.size(); ++i) {
        beta_terms[i] *= binomial_step * (jd - 2.0 + betas_[i].a) / (bd - jd - 1.0 + betas_[i].c);
      }
      for (std::size_t i = 0; i < interior_atoms_.size(); ++i) {
        const double x = interior_atoms_[i].x;
        atom_logs[i] += std::log(binomial_step) + std::log(x) - std::log1p(-x);
      }
    }
  }

  // q_b(j) for j = 2..b; index 0 holds j = 2.
  std::vector<double> jump_row(long b) const {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(b - 1));
    CompensatedSum total;
    for_each_rate(b, [&](long, double rate) {
      row.push_back(rate);
      total += rate;
      return true;
    });
    if (relative_difference(total.value(), lambda_total(b)) > kRateConsistencyTol) {
      throw ConsistencyError("rate table row sum disagrees with moment sum at b=" + std::to_string(b));
    }
    const double inv = 1.0 / total.value();
    for (double& q : row) q *= inv;
    return row;
  }

  // Inverse-CDF draw of J_b by sequential search from j = 2; u in [0, 1).
  long sample_jump(long b, double u) const {
    if (b == 2) return 2;
    const double target = u * lambda_total(b);
    double cumulative = 0.0;
    long last_positive = 2;
    long chosen = -1;
    for_each_rate(b, [&](long j, double rate) {
      cumulative += rate;
      if (rate > 0.0) last_positive = j;
      if (cumulative > target && rate > 0.0) {
        chosen = j;
        return false;
      }
      return true;
    });
    return chosen > 0 ? chosen : last_positive;
  }

  double mean_jump_minus_one(long b) const {
    check_state(b);
    CompensatedSum plain;
    CompensatedSum weighted;
    for (long i = 1; i < b; ++i) {
      plain += nu_[static_cast<std::size_t>(i - 1)];
      weighted += static_cast<double>(i) * nu_[static_cast<std::size_t>(i - 1)];
    }
    return static_cast<double>(b) * plain.value() / weighted.value() - 1.0;
  }

 private:
  struct BetaTerm {
    double weight, a, c;
    std::vector<double> nu;
  };
  struct InteriorAtom {
    double weight, x;
  };

  void check_state(long b) const {
    if (b < 2 || b > b_max_) {
      throw DomainError("state " + std::to_string(b) + " outside rate table range [2, " +
                        std::to_string(b_max_) + "]");
    }
  }

  const std::vector<double>& general_row(long b) const {
    const auto idx = static_cast<std::size_t>(b);
    std::call_once(general_once_[idx], [&] {
      std::vector<double> row;
      row.reserve(static_cast<std::size_t>(b - 1));
      for (long j = 2; j <= b; ++j) {
        CompensatedSum s;
        for (const auto& c : measure_.components()) {
          if (c.weight == 0.0) continue;
          if (const auto* g = std::get_if<GeneralDensity>(&c.kind)) {
            s += c.weight * detail::general_rate(*g, b, j);
          }
        }
        row.push_back(s.value());
      }
      general_rows_[idx] = std::move(row);
    });
    return general_rows_[idx];
  }

  LambdaMeasure measure_;
  long b_max_;
  std::vector<BetaTerm> betas_;
  std::vector<InteriorAtom> interior_atoms_;
  double atom0_ = 0.0;
  double atom1_ = 0.0;
  bool has_general_ = false;
  std::vector<double> nu_;
  std::vector<double> lambda_;
  mutable std::vector<std::vector<double>> general_rows_;
  mutable std::unique_ptr<std::once_flag[]> general_once_;
};

}  // namespace coalcol
