#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "coalcol/error.hpp"
#include "coalcol/quadrature.hpp"
#include "coalcol/special.hpp"

namespace coalcol {

// Beta(a, c) probability density x^{a-1} (1-x)^{c-1} / B(a, c).
struct BetaDensity {
  double a;
  double c;
};

// Dirac mass at `x` in [0, 1].
struct Atom {
  double x;
};

// Behaviour of a component near zero: mass of [0, x] is A x^alpha + O(x^{alpha + varsigma}).
struct PowerLaw {
  double A;
  double alpha;
  double varsigma;
};

// Arbitrary probability density on (0, 1). The optional power law describes
// the density's mass near 0; its exponent also drives the substitution used
// by quadrature to remove the endpoint singularity.
struct GeneralDensity {
  std::function<double(double)> pdf;
  std::optional<PowerLaw> near_zero;
};

struct Component {
  std::variant<BetaDensity, Atom, GeneralDensity> kind;
  double weight;
};

struct MeasureAsymptotics {
  double A;
  double alpha;
  double varsigma;
  double varsigma_prime;
};

namespace detail {

// Integrates g(x) pdf(x) over [0, 1]. With a power-law hint of exponent
// alpha < 1 the variable is changed to x = t^{1/alpha}, which turns the
// x^{alpha-1} singularity into a bounded integrand.
template <class G>
double integrate_against_density(const GeneralDensity& d, G&& g, std::vector<double> x_breaks,
                                 quad::Options opts = {}) {
  x_breaks.push_back(0.0);
  x_breaks.push_back(1.0);
  std::erase_if(x_breaks, [](double x) { return !(x >= 0.0 && x <= 1.0); });
  std::sort(x_breaks.begin(), x_breaks.end());
  x_breaks.erase(std::unique(x_breaks.begin(), x_breaks.end()), x_breaks.end());

  const double power =
      (d.near_zero && d.near_zero->alpha > 0.0 && d.near_zero->alpha < 1.0) ? d.near_zero->alpha : 1.0;
  if (power == 1.0) {
    auto f = [&](double x) { return g(x) * d.pdf(x); };
    return quad::integrate(f, std::span<const double>(x_breaks), opts).value;
  }
  std::vector<double> t_breaks;
  t_breaks.reserve(x_breaks.size());
  for (double x : x_breaks) t_breaks.push_back(std::pow(x, power));
  const double inv = 1.0 / power;
  auto f = [&](double t) {
    const double x = std::pow(t, inv);
    const double jacobian = inv * std::pow(t, inv - 1.0);
    return g(x) * d.pdf(x) * jacobian;
  };
  return quad::integrate(f, std::span<const double>(t_breaks), opts).value;
}

}  // namespace detail

// A probability measure on [0, 1] built from beta densities, atoms and
// general densities. Immutable after construction.
class LambdaMeasure {
 public:
  explicit LambdaMeasure(std::vector<Component> components) : components_(std::move(components)) {
    validate();
  }

  static LambdaMeasure kingman() { return LambdaMeasure({{Atom{0.0}, 1.0}}); }
  static LambdaMeasure lebesgue() { return LambdaMeasure({{BetaDensity{1.0, 1.0}, 1.0}}); }
  static LambdaMeasure beta(double a, double c) { return LambdaMeasure({{BetaDensity{a, c}, 1.0}}); }

  // alpha (1 - alpha/2) x^{alpha-1} dx + (alpha/2) delta_1: for this mixture
  // the jump law of the block-counting chain equals its limit law for j < n.
  static LambdaMeasure truncated_limit_example(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("example measure needs 0 < alpha < 1");
    return LambdaMeasure({{BetaDensity{alpha, 1.0}, 1.0 - alpha / 2.0}, {Atom{1.0}, alpha / 2.0}});
  }

  static LambdaMeasure from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::vector<Component>& components() const { return components_; }

  bool has_general_density() const {
    return std::any_of(components_.begin(), components_.end(), [](const Component& c) {
      return c.weight > 0.0 && std::holds_alternative<GeneralDensity>(c.kind);
    });
  }

  double atom_mass_at(double x) const {
    double mass = 0.0;
    for (const auto& c : components_) {
      if (const auto* atom = std::get_if<Atom>(&c.kind); atom && atom->x == x) mass += c.weight;
    }
    return mass;
  }

 private:
  void validate() const {
    if (components_.empty()) throw DomainError("measure has no components");
    CompensatedSum total;
    for (const auto& c : components_) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
        throw DomainError("component weight must be finite and nonnegative");
      }
      total += c.weight;
      std::visit(
          [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, BetaDensity>) {
              if (!(k.a > 0.0 && k.c > 0.0)) throw DomainError("beta density needs a > 0 and c > 0");
            } else if constexpr (std::is_same_v<K, Atom>) {
              if (!(k.x >= 0.0 && k.x <= 1.0)) throw DomainError("atom location must lie in [0, 1]");
            } else {
              if (!k.pdf) throw DomainError("general density has no pdf");
              if (c.weight > 0.0) {
                const double mass =
                    detail::integrate_against_density(k, [](double) { return 1.0; }, {},
                                                      {1e-11, 1e-11, 10000});
                if (std::abs(mass - 1.0) > 1e-9) {
                  throw DomainError("general density must integrate to 1, got " + std::to_string(mass));
                }
              }
            }
          },
          c.kind);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
      throw DomainError("component weights must sum to 1, got " + std::to_string(total.value()));
    }
  }

  std::vector<Component> components_;
};

// B(a, c+b) / B(a, c) as a ratio of gamma quotients; log-gamma differences
// lose about 1e-9 relative accuracy once b reaches 1e6.
inline double beta_nu(const BetaDensity& d, double b) {
  using boost::math::tgamma_delta_ratio;
  return tgamma_delta_ratio(d.c + b, d.a) / tgamma_delta_ratio(d.c, d.a);
}

// nu_b = integral of (1-x)^b against the measure.
inline double nu(const LambdaMeasure& measure, long b) {
  if (b < 0) throw DomainError("nu: b must be nonnegative");
  const double bd = static_cast<double>(b);
  CompensatedSum sum;
  for (const auto& c : measure.components()) {
    if (c.weight == 0.0) continue;
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, BetaDensity>) {
            sum += c.weight * beta_nu(k, bd);
          } else if constexpr (std::is_same_v<K, Atom>) {
            sum += c.weight * (b == 0 ? 1.0 : std::pow(1.0 - k.x, bd));
          } else {
            const double scale = 1.0 / (bd + 1.0);
            std::vector<double> breaks{scale, 4 * scale, 16 * scale, 64 * scale};
            sum += c.weight * detail::integrate_against_density(
                                  k, [bd](double x) { return std::pow(1.0 - x, bd); }, breaks);
          }
        },
        c.kind);
  }
  return sum.value();
}

// Integral of y^order over [x, 1] against the measure, order in {-1, -2}.
inline double truncated_moment(const LambdaMeasure& measure, double x, int order) {
  if (!(x > 0.0)) throw DomainError("truncated_moment: x must be positive");
  if (x > 1.0) throw DomainError("truncated_moment: x must not exceed 1");
  if (order != -1 && order != -2) throw DomainError("truncated_moment: order must be -1 or -2");
  const double log_x = std::log(x);
  // Breakpoints every unit of log y keep each panel well resolved.
  std::vector<double> s_breaks;
  for (double s = log_x; s < 0.0; s += 1.0) s_breaks.push_back(s);
  s_breaks.push_back(0.0);

  CompensatedSum sum;
  for (const auto& c : measure.components()) {
    if (c.weight == 0.0) continue;
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Atom>) {
            if (k.x >= x) sum += c.weight * std::pow(k.x, order);
          } else {
            // y = e^s: integrand e^{s (order + 1)} pdf(e^s).
            std::function<double(double)> f;
            if constexpr (std::is_same_v<K, BetaDensity>) {
              // 1 - e^s is formed as -expm1(s) so the (1-y)^{c-1} factor keeps full precision near y = 1.
              const double log_norm = log_beta(k.a, k.c);
              f = [k, log_norm, order](double s) {
                if (s >= 0.0) return 0.0;
                return std::exp(s * (order + k.a) + (k.c - 1.0) * std::log(-std::expm1(s)) - log_norm);
              };
            } else {
              f = [&k, order](double s) { return std::exp(s * (order + 1)) * k.pdf(std::exp(s)); };
            }
            if (s_breaks.size() >= 2) {
              // The integrand grows like x^{order+a} as x -> 0, so only a relative target is meaningful.
              sum += c.weight * quad::integrate(f, std::span<const double>(s_breaks), {1e-300, 1e-13, 20000}).value;
            }
          }
        },
        c.kind);
  }
  return sum.value();
}

inline MeasureAsymptotics asymptotics_of(const LambdaMeasure& measure) {
  struct Term {
    double alpha, A, varsigma;
  };
  std::vector<Term> terms;
  for (const auto& c : measure.components()) {
    if (c.weight == 0.0) continue;
    if (const auto* atom = std::get_if<Atom>(&c.kind)) {
      if (atom->x == 0.0) throw UnsupportedMeasure("atom at 0: no power-law behaviour near 0");
    } else if (const auto* beta = std::get_if<BetaDensity>(&c.kind)) {
      terms.push_back({beta->a, c.weight / (beta->a * std::exp(log_beta(beta->a, beta->c))), 1.0});
    } else {
      const auto& general = std::get<GeneralDensity>(c.kind);
      if (!general.near_zero) {
        throw UnsupportedMeasure("general density without a declared power law near 0");
      }
      terms.push_back({general.near_zero->alpha, c.weight * general.near_zero->A,
                       general.near_zero->varsigma});
    }
  }
  if (terms.empty()) throw UnsupportedMeasure("measure has no density component near 0");
  const double alpha =
      std::min_element(terms.begin(), terms.end(), [](auto& l, auto& r) { return l.alpha < r.alpha; })->alpha;
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw UnsupportedMeasure("leading exponent near 0 must lie in (0, 1), got " + std::to_string(alpha));
  }
  double A = 0.0;
  double varsigma = std::numeric_limits<double>::infinity();
  for (const auto& t : terms) {
    if (std::abs(t.alpha - alpha) < 1e-14) {
      A += t.A;
      varsigma = std::min(varsigma, t.varsigma);
    } else {
      // A subleading power x^{alpha'} enters the error term.
      varsigma = std::min(varsigma, t.alpha - alpha);
    }
  }
  return {A, alpha, varsigma, std::min(1.0, varsigma)};
}

inline LambdaMeasure LambdaMeasure::from_json(const nlohmann::json& j) {
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "kingman") return kingman();
    if (preset == "lebesgue") return lebesgue();
    if (preset == "beta") return beta(j.at("a").get<double>(), j.at("c").get<double>());
    if (preset == "example") return truncated_limit_example(j.at("alpha").get<double>());
    throw DomainError("unknown measure preset '" + preset + "'");
  }
  if (!j.contains("components") || !j.at("components").is_array()) {
    throw DomainError("measure JSON needs a 'components' array");
  }
  std::vector<Component> components;
  for (const auto& item : j.at("components")) {
    const auto kind = item.at("kind").get<std::string>();
    const double weight = item.at("weight").get<double>();
    if (kind == "beta") {
      components.push_back({BetaDensity{item.at("a").get<double>(), item.at("c").get<double>()}, weight});
    } else if (kind == "atom") {
      components.push_back({Atom{item.at("x").get<double>()}, weight});
    } else {
      throw DomainError("unknown component kind '" + kind + "'");
    }
  }
  return LambdaMeasure(std::move(components));
}

inline nlohmann::json LambdaMeasure::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : components_) {
    if (const auto* beta = std::get_if<BetaDensity>(&c.kind)) {
      list.push_back({{"kind", "beta"}, {"a", beta->a}, {"c", beta->c}, {"weight", c.weight}});
    } else if (const auto* atom = std::get_if<Atom>(&c.kind)) {
      list.push_back({{"kind", "atom"}, {"x", atom->x}, {"weight", c.weight}});
    } else {
      list.push_back({{"kind", "general"}, {"weight", c.weight}});
    }
  }
  return {{"components", list}};
}

}  // namespace coalcol
