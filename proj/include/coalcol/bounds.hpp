#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coalcol/chain.hpp"
#include "coalcol/error.hpp"
#include "coalcol/measure.hpp"
#include "coalcol/random.hpp"
#include "coalcol/rates.hpp"
#include "coalcol/special.hpp"

namespace coalcol {

// Exponents of the bounding construction: n^-gamma reweights the body of the
// jump law, floor(n^beta) is the end of the body, floor(n^theta) carries the
// intermediate atom and k >= floor(n^upsilon) is the lower end of the state range.
struct BoundParams {
  double gamma;
  double beta;
  double theta;
  double upsilon;

  nlohmann::json to_json() const {
    return {{"gamma", gamma}, {"beta", beta}, {"theta", theta}, {"upsilon", upsilon}};
  }
  static BoundParams from_json(const nlohmann::json& j) {
    return {j.at("gamma").get<double>(), j.at("beta").get<double>(), j.at("theta").get<double>(),
            j.at("upsilon").get<double>()};
  }
};

// `dominance`: the inequalities under which the bounding laws sandwich the
// jump law. `stable_limit` adds the inequalities under which sums of the
// bounding jumps share the stable limit of the collision count.
enum class ConstraintSet { dominance, stable_limit };

inline std::string to_string(ConstraintSet s) { return s == ConstraintSet::dominance ? "dominance" : "stable_limit"; }

inline ConstraintSet constraint_set_from_string(const std::string& s) {
  if (s == "dominance") return ConstraintSet::dominance;
  if (s == "stable_limit") return ConstraintSet::stable_limit;
  throw DomainError("unknown constraint set '" + s + "'");
}

struct ConstraintSlack {
  std::string name;
  double slack;  // positive when the strict inequality holds
};

inline constexpr double kFeasibilitySlack = 1e-3;

// Lower bound on varsigma needed by the stable-limit set.
inline double stable_limit_varsigma_threshold(double alpha) {
  return std::max((2.0 - alpha) * (2.0 - alpha) / (5.0 - 5.0 * alpha + alpha * alpha), 1.0 - alpha);
}

inline std::vector<ConstraintSlack> evaluate_constraints(const BoundParams& p, double alpha, double varsigma,
                                                         ConstraintSet set) {
  const double a2 = 2.0 - alpha;
  const double vp = std::min(1.0, varsigma);
  std::vector<ConstraintSlack> out{
      {"upsilon < 1", 1.0 - p.upsilon},
      {"theta < upsilon", p.upsilon - p.theta},
      {"beta < theta", p.theta - p.beta},
      {"gamma/(2-alpha) < beta", p.beta - p.gamma / a2},
      {"gamma > 0", p.gamma / a2},
      {"gamma < (upsilon-beta)(2-alpha)varsigma'/(2-alpha-varsigma')",
       (p.upsilon - p.beta) * a2 * vp / (a2 - vp) - p.gamma},
  };
  if (set == ConstraintSet::stable_limit) {
    out.push_back({"gamma > (1-alpha)/(2-alpha)", p.gamma - (1.0 - alpha) / a2});
    out.push_back({"beta > (5-5alpha+alpha^2)/(2-alpha)^3",
                   p.beta - (5.0 - 5.0 * alpha + alpha * alpha) / (a2 * a2 * a2)});
    out.push_back({"theta < beta(2-alpha) - (1-alpha)/(2-alpha)", p.beta * a2 - (1.0 - alpha) / a2 - p.theta});
    out.push_back({"theta > (3-2alpha)/(2-alpha)^2", p.theta - (3.0 - 2.0 * alpha) / (a2 * a2)});
  }
  return out;
}

inline double minimum_slack(const std::vector<ConstraintSlack>& slacks) {
  double m = slacks.front().slack;
  for (const auto& s : slacks) m = std::min(m, s.slack);
  return m;
}

// Plain re-statement of every inequality, kept separate from the slack
// bookkeeping so that a search result is checked by independent code.
inline bool satisfies_constraints(const BoundParams& p, double alpha, double varsigma, ConstraintSet set) {
  const double a = alpha;
  const double vp = std::min(1.0, varsigma);
  bool ok = 1.0 > p.upsilon && p.upsilon > p.theta && p.theta > p.beta && p.beta > p.gamma / (2.0 - a) &&
            p.gamma / (2.0 - a) > 0.0 && p.gamma < (p.upsilon - p.beta) * (2.0 - a) * vp / (2.0 - a - vp);
  if (set == ConstraintSet::stable_limit) {
    ok = ok && p.gamma > (1.0 - a) / (2.0 - a) && p.beta > (5.0 - 5.0 * a + a * a) / std::pow(2.0 - a, 3.0) &&
         p.beta * (2.0 - a) - (1.0 - a) / (2.0 - a) > p.theta && p.theta > (3.0 - 2.0 * a) / std::pow(2.0 - a, 2.0);
  }
  return ok;
}

// Grid search over (gamma, beta, theta, upsilon) maximizing the smallest
// slack, followed by a shrinking coordinate search around the best point.
inline BoundParams find_feasible_params(double alpha, double varsigma, ConstraintSet set) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("find_feasible_params: alpha must lie in (0, 1)");
  if (!(varsigma > 0.0)) throw DomainError("find_feasible_params: varsigma must be positive");
  if (set == ConstraintSet::stable_limit) {
    const double need = stable_limit_varsigma_threshold(alpha);
    if (!(varsigma > need)) {
      throw InfeasibleParams("varsigma > max{(2-alpha)^2/(5-5alpha+alpha^2), 1-alpha}",
                             "varsigma=" + std::to_string(varsigma) + " but the bound is " + std::to_string(need));
    }
  }
  auto score = [&](const BoundParams& p) { return minimum_slack(evaluate_constraints(p, alpha, varsigma, set)); };
  constexpr int kGrid = 40;
  BoundParams best{0.5, 0.5, 0.5, 0.5};
  double best_score = score(best);
  for (int iu = 1; iu < kGrid; ++iu) {
    const double u = static_cast<double>(iu) / kGrid;
    for (int it = 1; it < iu; ++it) {
      const double t = static_cast<double>(it) / kGrid;
      for (int ib = 1; ib < it; ++ib) {
        const double b = static_cast<double>(ib) / kGrid;
        for (int ig = 1; ig < kGrid; ++ig) {
          const BoundParams p{static_cast<double>(ig) / kGrid, b, t, u};
          const double s = score(p);
          if (s > best_score) {
            best_score = s;
            best = p;
          }
        }
      }
    }
  }
  for (double step = 0.5 / kGrid; step > 1e-7; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int coord = 0; coord < 4; ++coord) {
        for (double dir : {-1.0, 1.0}) {
          BoundParams p = best;
          double* field[] = {&p.gamma, &p.beta, &p.theta, &p.upsilon};
          *field[coord] += dir * step;
          const double s = score(p);
          if (s > best_score) {
            best_score = s;
            best = p;
            improved = true;
          }
        }
      }
    }
  }
  if (best_score < kFeasibilitySlack) {
    const auto slacks = evaluate_constraints(best, alpha, varsigma, set);
    const auto worst = std::min_element(slacks.begin(), slacks.end(),
                                        [](const auto& x, const auto& y) { return x.slack < y.slack; });
    throw InfeasibleParams(worst->name, "best attainable slack " + std::to_string(best_score) + " is below " +
                                            std::to_string(kFeasibilitySlack));
  }
  if (!satisfies_constraints(best, alpha, varsigma, set)) {
    throw ConsistencyError("feasible-parameter search returned a point that fails direct re-evaluation");
  }
  return best;
}

// Throws InfeasibleParams naming the first violated inequality.
inline void require_feasible(const BoundParams& p, double alpha, double varsigma, ConstraintSet set) {
  for (const auto& s : evaluate_constraints(p, alpha, varsigma, set)) {
    if (!(s.slack > 0.0)) {
      throw InfeasibleParams(s.name, "slack " + std::to_string(s.slack));
    }
  }
}

// floor(n^x), guarded against pow rounding just below an exact integer.
inline long floor_power(long n, double x) {
  const long double v = std::pow(static_cast<long double>(n), static_cast<long double>(x));
  auto f = static_cast<long>(std::floor(v));
  if (static_cast<long double>(f + 1) - v < 1e-12L * v) ++f;
  return f;
}

namespace detail {

// max over l in {k..n} of lambda_l(cut+1 : l) / lambda_l, for two cuts at once.
inline std::pair<double, double> tail_ratio_maxima(const RateTable& table, long k, long n, long cut_a, long cut_b) {
  auto ratios = [&](long ell) {
    CompensatedSum total, tail_a, tail_b;
    table.for_each_rate(ell, [&](long j, double rate) {
      total += rate;
      if (j > cut_a) tail_a += rate;
      if (j > cut_b) tail_b += rate;
      return true;
    });
    return std::pair{tail_a.value() / total.value(), tail_b.value() / total.value()};
  };
  std::vector<long> candidates;
  constexpr long kExactLimit = 2000;
  if (n - k + 1 <= kExactLimit) {
    for (long ell = k; ell <= n; ++ell) candidates.push_back(ell);
  } else {
    constexpr int kGrid = 200;
    const double ratio = std::pow(static_cast<double>(n) / static_cast<double>(k), 1.0 / (kGrid - 1));
    double x = static_cast<double>(k);
    for (int i = 0; i < kGrid; ++i, x *= ratio) candidates.push_back(std::clamp(std::lround(x), k, n));
    candidates.push_back(n);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  }
  const auto values = parallel_map<std::pair<double, double>>(candidates.size(),
                                                              [&](std::size_t i) { return ratios(candidates[i]); });
  double best_a = 0.0, best_b = 0.0;
  std::size_t arg_a = 0, arg_b = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].first > best_a) best_a = values[i].first, arg_a = i;
    if (values[i].second > best_b) best_b = values[i].second, arg_b = i;
  }
  if (n - k + 1 > kExactLimit) {
    // Refine: scan every state between the neighbours of each grid maximizer.
    for (std::size_t arg : {arg_a, arg_b}) {
      const long lo = candidates[arg == 0 ? 0 : arg - 1];
      const long hi = candidates[std::min(arg + 1, candidates.size() - 1)];
      const long stride = std::max(1L, (hi - lo) / kExactLimit);
      std::vector<long> local;
      for (long ell = lo; ell <= hi; ell += stride) local.push_back(ell);
      const auto refined = parallel_map<std::pair<double, double>>(local.size(),
                                                                   [&](std::size_t i) { return ratios(local[i]); });
      for (const auto& r : refined) {
        best_a = std::max(best_a, r.first);
        best_b = std::max(best_b, r.second);
      }
    }
  }
  return {best_a, best_b};
}

}  // namespace detail

enum class BoundSide { plus, minus };

inline std::string to_string(BoundSide s) { return s == BoundSide::plus ? "plus" : "minus"; }

// One of the two bounding jump laws on states {k..n}. The support is stored
// sparsely in increasing order; `cdf` is normalized to end at exactly 1.
struct BoundedJumpLaw {
  BoundSide side;
  long n;
  long k;
  BoundParams params;
  long floor_beta;
  long floor_theta;
  double max_tail_beta;   // max_l lambda_l(floor_beta+1 : l) / lambda_l
  double max_tail_theta;  // max_l lambda_l(floor_theta+1 : l) / lambda_l
  std::vector<long> support;
  std::vector<double> pmf;
  std::vector<double> cdf;

  double probability(long j) const {
    const auto it = std::lower_bound(support.begin(), support.end(), j);
    return (it != support.end() && *it == j) ? pmf[static_cast<std::size_t>(it - support.begin())] : 0.0;
  }
  // P[J <= j].
  double cdf_at(long j) const {
    const auto it = std::upper_bound(support.begin(), support.end(), j);
    return it == support.begin() ? 0.0 : cdf[static_cast<std::size_t>(it - support.begin()) - 1];
  }
  double survival(long m) const { return 1.0 - cdf_at(m - 1); }
  // Smallest support point whose CDF exceeds u.
  long quantile(double u) const {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return it == cdf.end() ? support.back() : support[static_cast<std::size_t>(it - cdf.begin())];
  }
  double mean_minus_one() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < support.size(); ++i) s += static_cast<double>(support[i] - 1) * pmf[i];
    return s.value();
  }
};

namespace detail {

inline void check_law_geometry(long n, long k, long floor_beta, long floor_theta) {
  if (k < 1 || k > n) throw DomainError("bounded_jump_law: need 1 <= k <= n");
  if (floor_beta < 3) throw DomainError("bounded_jump_law: floor(n^beta) must be at least 3");
  if (k <= floor_beta) throw DomainError("bounded_jump_law: need k > floor(n^beta)");
  if (floor_theta >= n) throw DomainError("bounded_jump_law: need floor(n^theta) < n");
  if (floor_theta <= floor_beta) {
    throw NotYetValid("bounded_jump_law: the atom at floor(n^theta) falls inside the body", floor_theta, 0.0);
  }
}

inline void finish_law(BoundedJumpLaw& law) {
  CompensatedSum total;
  for (std::size_t i = 0; i < law.pmf.size(); ++i) {
    if (law.pmf[i] < 0.0) {
      throw NotYetValid(to_string(law.side) + " bounding law has a negative entry; n is too small", law.support[i],
                        law.pmf[i]);
    }
    total += law.pmf[i];
  }
  if (std::abs(total.value() - 1.0) > 1e-10) {
    throw ConsistencyError("bounding law sums to " + std::to_string(total.value()));
  }
  law.cdf.resize(law.pmf.size());
  double cumulative = 0.0;
  for (std::size_t i = 0; i < law.pmf.size(); ++i) law.cdf[i] = (cumulative += law.pmf[i]);
  for (double& c : law.cdf) c /= cumulative;
  law.cdf.back() = 1.0;
}

}  // namespace detail

struct BoundedJumpLaws {
  BoundedJumpLaw plus;
  BoundedJumpLaw minus;
};

// Builds both bounding laws; the tail-ratio maxima are shared between them.
inline BoundedJumpLaws bounded_jump_laws(const RateTable& table, long n, long k, const BoundParams& params) {
  if (n > table.b_max()) throw DomainError("bounded_jump_law: n exceeds rate table range");
  const long fb = floor_power(n, params.beta);
  const long ft = floor_power(n, params.theta);
  detail::check_law_geometry(n, k, fb, ft);
  const auto [m_beta, m_theta] = detail::tail_ratio_maxima(table, k, n, fb, ft);
  const double shrink = std::pow(static_cast<double>(n), -params.gamma);

  // Rates of state s split into j = 2, the body 3..fb and the tail beyond fb.
  struct Split {
    double total, first;
    std::vector<double> body;
    double body_sum, tail;
  };
  auto split = [&](long s) {
    Split out{table.lambda_total(s), 0.0, {}, 0.0, 0.0};
    CompensatedSum body, tail;
    table.for_each_rate(s, [&](long j, double rate) {
      if (j == 2) {
        out.first = rate;
      } else if (j <= fb) {
        out.body.push_back(rate);
        body += rate;
      } else {
        tail += rate;
      }
      return true;
    });
    out.body_sum = body.value();
    out.tail = tail.value();
    return out;
  };

  BoundedJumpLaws laws{{BoundSide::plus, n, k, params, fb, ft, m_beta, m_theta, {}, {}, {}},
                       {BoundSide::minus, n, k, params, fb, ft, m_beta, m_theta, {}, {}, {}}};
  {
    const Split sk = split(k);
    auto& law = laws.plus;
    law.support.push_back(2);
    law.pmf.push_back((sk.first + shrink * sk.body_sum + sk.tail) / sk.total);
    for (long j = 3; j <= fb; ++j) {
      law.support.push_back(j);
      law.pmf.push_back(sk.body[static_cast<std::size_t>(j - 3)] * (1.0 - shrink) / sk.total);
    }
    detail::finish_law(law);
  }
  {
    const Split sn = split(n);
    auto& law = laws.minus;
    law.support.push_back(2);
    law.pmf.push_back((sn.first - shrink * sn.body_sum + sn.tail) / sn.total - 2.0 * m_beta);
    for (long j = 3; j <= fb; ++j) {
      law.support.push_back(j);
      law.pmf.push_back(sn.body[static_cast<std::size_t>(j - 3)] * (1.0 + shrink) / sn.total);
    }
    law.support.push_back(ft);
    law.pmf.push_back(2.0 * m_beta - 2.0 * m_theta);
    law.support.push_back(n);
    law.pmf.push_back(2.0 * m_theta);
    detail::finish_law(law);
  }
  return laws;
}

inline BoundedJumpLaw bounded_jump_law(const RateTable& table, long n, long k, const BoundParams& params,
                                       BoundSide side) {
  auto laws = bounded_jump_laws(table, n, k, params);
  return side == BoundSide::plus ? std::move(laws.plus) : std::move(laws.minus);
}

struct DominanceReport {
  long n;
  long k;
  BoundParams params;
  bool verified;
  std::vector<std::pair<long, long>> witnesses;  // (b, m) pairs where an inequality fails
  long violations = 0;
  long states_checked = 0;
  double worst_slack = 0.0;  // most negative margin seen (0 when none)

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& [b, m] : witnesses) w.push_back({b, m});
    return {{"n", n},
            {"k", k},
            {"params", params.to_json()},
            {"verified", verified},
            {"witnesses", w},
            {"violations", violations},
            {"states_checked", states_checked},
            {"worst_slack", worst_slack}};
  }
};

inline constexpr double kDominanceSlack = 1e-12;
inline constexpr long kDominanceFullCheckCells = 50'000'000;

// The bounding laws together with the true jump laws on {k..n}, arranged so
// that all three are sampled by inverse CDF from one uniform. CDFs of J_b are
// accumulated in the same order for checking and for sampling, so the checked
// inequalities are exactly the ones the coupling relies on.
class CoupledJumps {
 public:
  CoupledJumps(const RateTable& table, long n, long k, const BoundParams& params)
      : table_(table), laws_(bounded_jump_laws(table, n, k, params)), n_(n), k_(k) {
    row_totals_.resize(static_cast<std::size_t>(n - k + 1));
    row_once_ = std::make_unique<std::once_flag[]>(static_cast<std::size_t>(n - k + 1));
  }

  const BoundedJumpLaw& plus() const { return laws_.plus; }
  const BoundedJumpLaw& minus() const { return laws_.minus; }
  long n() const { return n_; }
  long k() const { return k_; }

  // Compares P[J+ >= m] <= P[J_b >= m] <= P[J- >= m] for all m in {2..n} and
  // every b in {k..n}, or a deterministic stratified subset of b when the full
  // check would exceed kDominanceFullCheckCells cells.
  DominanceReport verify(std::size_t max_witnesses = 100) {
    DominanceReport report{n_, k_, laws_.plus.params, false, {}, 0, 0, 0.0};
    std::vector<long> states;
    if ((n_ - k_ + 1) * n_ <= kDominanceFullCheckCells) {
      for (long b = k_; b <= n_; ++b) states.push_back(b);
    } else {
      const long strata = std::max(2L, kDominanceFullCheckCells / n_);
      for (long i = 0; i < strata; ++i) states.push_back(k_ + (n_ - k_) * i / (strata - 1));
      states.erase(std::unique(states.begin(), states.end()), states.end());
    }
    struct StateResult {
      std::vector<long> bad_m;
      long violations = 0;
      double worst = 0.0;
    };
    const auto results = parallel_map<StateResult>(states.size(), [&](std::size_t i) {
      const long b = states[i];
      StateResult r;
      const double total = row_total(b);
      double cumulative = 0.0;
      long support_plus = 0, support_minus = 0;
      double f_plus = 0.0, f_minus = 0.0;
      auto record = [&](long j, double margin) {
        if (margin < -kDominanceSlack) {
          ++r.violations;
          if (r.bad_m.size() < max_witnesses) r.bad_m.push_back(j + 1);
        }
        r.worst = std::min(r.worst, margin);
      };
      // P[J >= j+1] = 1 - F(j) for j = 2..n-1.
      auto advance = [](const BoundedJumpLaw& law, long j, long& pos, double& f) {
        while (pos < static_cast<long>(law.support.size()) && law.support[static_cast<std::size_t>(pos)] <= j) {
          f = law.cdf[static_cast<std::size_t>(pos)];
          ++pos;
        }
      };
      long j = 2;
      table_.for_each_rate(b, [&](long jj, double rate) {
        cumulative += rate;
        j = jj;
        if (jj >= n_) return false;
        const double f_b = cumulative / total;
        advance(laws_.plus, jj, support_plus, f_plus);
        advance(laws_.minus, jj, support_minus, f_minus);
        record(jj, f_plus - f_b);
        record(jj, f_b - f_minus);
        return true;
      });
      for (long jj = j + 1; jj < n_; ++jj) {
        advance(laws_.plus, jj, support_plus, f_plus);
        advance(laws_.minus, jj, support_minus, f_minus);
        record(jj, f_plus - 1.0);
        record(jj, 1.0 - f_minus);
      }
      return r;
    });
    for (std::size_t i = 0; i < results.size(); ++i) {
      report.violations += results[i].violations;
      report.worst_slack = std::min(report.worst_slack, results[i].worst);
      for (long m : results[i].bad_m) {
        if (report.witnesses.size() < max_witnesses) report.witnesses.emplace_back(states[i], m);
      }
    }
    report.states_checked = static_cast<long>(states.size());
    report.verified = report.violations == 0;
    verified_ = report.verified;
    return report;
  }

  bool verified() const { return verified_; }

  // Inverse CDF of J_b at u with the same accumulation as verify().
  long jump_quantile(long b, double u) const {
    const double total = row_total(b);
    double cumulative = 0.0;
    long chosen = b;
    table_.for_each_rate(b, [&](long j, double rate) {
      cumulative += rate;
      if (cumulative / total > u) {
        chosen = j;
        return false;
      }
      return true;
    });
    return chosen;
  }

  struct Triple {
    long plus, b, minus;
  };

  // Monotone coupling through a single uniform.
  Triple coupled_triple(long b, double u) const {
    if (!verified_) throw DominanceNotVerified("coupled_triple needs a successful dominance check");
    if (b < k_ || b > n_) throw DomainError("coupled_triple: b must lie in {k..n}");
    return {laws_.plus.quantile(u), jump_quantile(b, u), laws_.minus.quantile(u)};
  }
  Triple coupled_triple(long b, RngStream& rng) const { return coupled_triple(b, rng.uniform()); }

 private:
  // Plain left-to-right sum so that the accumulated CDF ends at exactly 1.
  double row_total(long b) const {
    const auto idx = static_cast<std::size_t>(b - k_);
    std::call_once(row_once_[idx], [&] {
      double s = 0.0;
      table_.for_each_rate(b, [&](long, double rate) {
        s += rate;
        return true;
      });
      row_totals_[idx] = s;
    });
    return row_totals_[idx];
  }

  const RateTable& table_;
  BoundedJumpLaws laws_;
  long n_;
  long k_;
  bool verified_ = false;
  mutable std::vector<double> row_totals_;
  std::unique_ptr<std::once_flag[]> row_once_;
};

inline DominanceReport verify_dominance(const RateTable& table, long n, long k, const BoundParams& params) {
  CoupledJumps coupled(table, n, k, params);
  return coupled.verify();
}

// Rate expressions bounding the mean gaps of the two laws.
inline double mean_gap_rate_minus(long n, double alpha, const BoundParams& p) {
  const double nd = static_cast<double>(n);
  return std::max({std::pow(nd, -p.gamma), std::pow(nd, -p.beta * (1.0 - alpha)),
                   std::pow(nd, p.theta - p.beta * (2.0 - alpha)), std::pow(nd, 1.0 - p.theta * (2.0 - alpha))});
}

inline double mean_gap_rate_plus(long n, double alpha, const BoundParams& p) {
  const double nd = static_cast<double>(n);
  return std::max(std::pow(nd, -p.beta * (1.0 - alpha)), std::pow(nd, -p.gamma));
}

struct MeanGaps {
  double gap_minus;  // |E[J- - 1] - E[J_n - 1]|
  double gap_plus;   // |E[J+ - 1] - E[J_k - 1]|
};

inline MeanGaps mean_gaps(const RateTable& table, long n, long k, const BoundParams& params) {
  const auto laws = bounded_jump_laws(table, n, k, params);
  return {std::abs(laws.minus.mean_minus_one() - table.mean_jump_minus_one(n)),
          std::abs(laws.plus.mean_minus_one() - table.mean_jump_minus_one(k))};
}

struct MeanGapCheck {
  double gap_minus;
  double gap_plus;
  double bound_minus;  // c_minus * rate(n), c fitted at n_fit
  double bound_plus;
  long n_fit;
  long k_fit;
  bool passed;  // both gaps within 10x their bounds
};

// The constants are fitted at n_fit with k_fit = floor(n_fit^(log k / log n)),
// then the rate expressions are evaluated at n.
inline MeanGapCheck mean_gap_check(const RateTable& table, double alpha, long n, long k, const BoundParams& params,
                                   long n_fit) {
  const long k_fit = floor_power(n_fit, std::log(static_cast<double>(k)) / std::log(static_cast<double>(n)));
  const MeanGaps at_fit = mean_gaps(table, n_fit, k_fit, params);
  const MeanGaps at_n = mean_gaps(table, n, k, params);
  const double c_minus = at_fit.gap_minus / mean_gap_rate_minus(n_fit, alpha, params);
  const double c_plus = at_fit.gap_plus / mean_gap_rate_plus(n_fit, alpha, params);
  MeanGapCheck out{at_n.gap_minus,
                   at_n.gap_plus,
                   c_minus * mean_gap_rate_minus(n, alpha, params),
                   c_plus * mean_gap_rate_plus(n, alpha, params),
                   n_fit,
                   k_fit,
                   false};
  out.passed = out.gap_minus <= 10.0 * out.bound_minus && out.gap_plus <= 10.0 * out.bound_plus;
  return out;
}

// sum_{j > floor(n^beta)} j lambda_{k,j} / lambda_k.
inline double tail_mean(const RateTable& table, long n, long k, double beta) {
  const long cut = floor_power(n, beta);
  CompensatedSum s;
  table.for_each_rate(k, [&](long j, double rate) {
    if (j > cut) s += static_cast<double>(j) * rate;
    return true;
  });
  return s.value() / table.lambda_total(k);
}

inline double tail_mean_asymptote(long n, double alpha, double beta) {
  return (2.0 - alpha) / ((1.0 - alpha) * std::tgamma(alpha)) * std::pow(static_cast<double>(n), -beta * (1.0 - alpha));
}

enum class SumMode { sum_h, hit_ell };

// sum_h: the sum of h independent decrements J - 1.
// hit_ell: the number of decrements needed for the running sum to reach ell.
inline long bounded_sum_and_hit(const BoundedJumpLaw& law, long h_or_ell, SumMode mode, RngStream& rng) {
  if (h_or_ell < 1) throw DomainError("bounded_sum_and_hit: h or ell must be at least 1");
  if (mode == SumMode::sum_h) {
    long total = 0;
    for (long i = 0; i < h_or_ell; ++i) total += law.quantile(rng.uniform()) - 1;
    return total;
  }
  long total = 0;
  long count = 0;
  while (total < h_or_ell) {
    total += law.quantile(rng.uniform()) - 1;
    ++count;
  }
  return count;
}

// (S - h/(1-alpha)) / (h/(1-alpha))^{1/(2-alpha)}.
inline double normalize_bounded_sum(long sum, long h, double alpha) {
  const double centre = static_cast<double>(h) / (1.0 - alpha);
  return (static_cast<double>(sum) - centre) / std::pow(centre, 1.0 / (2.0 - alpha));
}

}  // namespace coalcol
