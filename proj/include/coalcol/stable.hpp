#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "coalcol/error.hpp"
#include "coalcol/parallel.hpp"
#include "coalcol/quadrature.hpp"
#include "coalcol/random.hpp"
#include "coalcol/special.hpp"
#include "coalcol/stats.hpp"

namespace coalcol {

// Stable parameter tuple (index, skewness, scale, location).
struct StableParameters {
  double index;
  double skewness;
  double scale;
  double location;
};

// Type 1: CF exp(-scale^a |u|^a (1 - i skew tan(pi a/2) sign u) + i loc u).
// Type 0: same modulus, location shifted so the law is continuous in (a, skew).
enum class Parametrization { type0, type1 };

// The only place the two conventions are related (index != 1):
// loc0 = loc1 + skew * scale * tan(pi a / 2).
inline StableParameters convert_parametrization(const StableParameters& p, Parametrization from,
                                                Parametrization to) {
  if (p.index == 1.0) throw DomainError("parametrization conversion needs index != 1");
  if (from == to) return p;
  const double shift = p.skewness * p.scale * std::tan(std::numbers::pi * p.index / 2.0);
  StableParameters out = p;
  out.location = (from == Parametrization::type1) ? p.location + shift : p.location - shift;
  return out;
}

// Characteristic function of a type-1 parametrized stable law, index != 1.
inline std::complex<double> stable_cf_type1(const StableParameters& p, double u) {
  if (u == 0.0) return {1.0, 0.0};
  const double a = p.index;
  const double s = sign_of(u);
  const double mag = std::pow(p.scale * std::abs(u), a);
  const std::complex<double> expo(-mag, mag * p.skewness * std::tan(std::numbers::pi * a / 2.0) * s + p.location * u);
  return std::exp(expo);
}

namespace detail {

// CDF of the standard type-1 law (scale 1, location 0) with index a in (1, 2)
// from Zolotarev's integral representation, which is free of oscillation and
// stays accurate far out in both tails.
inline double stable_cdf_integral(double a, double skew, double z) {
  if (!(a > 1.0 && a < 2.0)) throw DomainError("stable_cdf_integral: index must lie in (1, 2)");
  if (z < 0.0) return 1.0 - stable_cdf_integral(a, -skew, -z);
  const double pi = std::numbers::pi;
  const double theta0 = std::atan(skew * std::tan(pi * a / 2.0)) / a;
  if (z == 0.0) return (pi / 2.0 - theta0) / pi;
  const double log_c = std::log(std::cos(a * theta0)) / (a - 1.0);
  const double power = a / (a - 1.0);
  const double log_z = power * std::log(z);
  // h(theta) = log(z^{a/(a-1)} V(theta)), monotone on (-theta0, pi/2).
  auto exponent = [&](double theta) {
    const double c = std::cos(theta);
    const double sn = std::sin(a * (theta0 + theta));
    const double tail = std::cos(a * theta0 + (a - 1.0) * theta);
    if (!(c > 0.0) || !(sn > 0.0) || !(tail > 0.0)) {
      return sn <= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return log_z + log_c + power * (std::log(c) - std::log(sn)) + std::log(tail) - std::log(c);
  };
  auto integrand = [&](double theta) { return std::exp(-std::exp(exponent(theta))); };
  const double lo = -theta0;
  const double hi = pi / 2.0;
  std::vector<double> breaks{lo, hi};
  for (double f : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999}) breaks.push_back(lo + f * (hi - lo));
  // Far in the tail the integrand is a narrow front where h crosses 0; bracket it.
  const double h_lo = exponent(lo + 1e-12 * (hi - lo));
  const double h_hi = exponent(hi - 1e-12 * (hi - lo));
  for (double level : {-20.0, -5.0, -2.0, 0.0, 1.0, 2.0, 3.5}) {
    if ((h_lo - level) * (h_hi - level) >= 0.0) continue;
    double l = lo, r = hi;
    for (int it = 0; it < 200 && r - l > 1e-15 * (hi - lo); ++it) {
      const double m = 0.5 * (l + r);
      ((exponent(m) - level) * (h_lo - level) > 0.0 ? l : r) = m;
    }
    breaks.push_back(0.5 * (l + r));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double value = quad::integrate(integrand, std::span<const double>(breaks), {1e-13, 0.0, 10000}).value;
  return 1.0 - value / pi;
}

}  // namespace detail

// The limit law of the normalized collision count: index 2 - alpha, totally
// skewed to the left, with CF exp(-e^{-i pi alpha sign(u)/2} |u|^{2-alpha}).
// The mirrored variant uses e^{+i pi alpha sign(u)/2} and is the law of -S.
class StableLaw {
 public:
  explicit StableLaw(double alpha, bool mirrored = false) : alpha_(alpha), mirrored_(mirrored) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("stable law needs 0 < alpha < 1");
  }
  static StableLaw mirrored(double alpha) { return StableLaw(alpha, true); }

  double alpha() const { return alpha_; }
  bool is_mirrored() const { return mirrored_; }
  double index() const { return 2.0 - alpha_; }
  double skewness() const { return mirrored_ ? 1.0 : -1.0; }
  double scale() const { return std::pow(std::cos(std::numbers::pi * alpha_ / 2.0), 1.0 / index()); }
  StableParameters parameters() const { return {index(), skewness(), scale(), 0.0}; }

  std::complex<double> cf(double u) const {
    if (u == 0.0) return {1.0, 0.0};
    const double angle = (mirrored_ ? 1.0 : -1.0) * std::numbers::pi * alpha_ * sign_of(u) / 2.0;
    return std::exp(-std::polar(1.0, angle) * std::pow(std::abs(u), index()));
  }

  // Same CF through the (index, skewness, scale, location) tuple.
  std::complex<double> cf_canonical(double u) const { return stable_cf_type1(parameters(), u); }

  // |cf(u)| < 1e-16 beyond this point.
  double truncation_point() const {
    return std::pow(36.8 / std::cos(std::numbers::pi * alpha_ / 2.0), 1.0 / index());
  }

  // Inversion F(t) = 1/2 - (1/pi) int_0^inf Im(e^{-iut} cf(u)) / u du.
  double cdf_inversion(double t) const {
    auto f = [&](double u) { return std::exp(-damping() * std::pow(u, index())) * std::sin(phase(u) - u * t) / u; };
    return 0.5 - integrate_oscillatory(f, t) / std::numbers::pi;
  }

  double density(double t) const {
    auto f = [&](double u) { return std::exp(-damping() * std::pow(u, index())) * std::cos(phase(u) - u * t); };
    return integrate_oscillatory(f, t) / std::numbers::pi;
  }

  // CDF through the non-oscillatory integral representation (any t).
  double cdf_integral(double t) const { return detail::stable_cdf_integral(index(), skewness(), t / scale()); }

  // Inversion inside [-inversion_range, inversion_range], integral representation outside.
  double cdf(double t) const {
    if (std::isnan(t)) throw DomainError("stable cdf of NaN");
    if (std::isinf(t)) return t < 0 ? 0.0 : 1.0;
    if (std::abs(t) <= kInversionRange) return std::clamp(cdf_inversion(t), 0.0, 1.0);
    return std::clamp(cdf_integral(t), 0.0, 1.0);
  }

  // Chambers-Mallows-Stuck transform for index != 1.
  double sample(RngStream& rng) const {
    const double pi = std::numbers::pi;
    const double a = index();
    const double v = pi * (rng.uniform_open() - 0.5);
    const double w = rng.exponential();
    const double t = skewness() * std::tan(pi * a / 2.0);
    const double b = std::atan(t) / a;
    const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
    const double x = s * std::sin(a * (v + b)) / std::pow(std::cos(v), 1.0 / a) *
                     std::pow(std::cos(v - a * (v + b)) / w, (1.0 - a) / a);
    return scale() * x;
  }

  static constexpr double kInversionRange = 40.0;

 private:
  double damping() const { return std::cos(std::numbers::pi * alpha_ / 2.0); }
  double phase(double u) const {
    return (mirrored_ ? -1.0 : 1.0) * std::sin(std::numbers::pi * alpha_ / 2.0) * std::pow(u, index());
  }

  // Integrates over [0, u_max] with roughly one panel per half period of e^{-iut}.
  template <class F>
  double integrate_oscillatory(F&& f, double t) const {
    const double u_max = truncation_point();
    const double width = std::min(u_max / 8.0, std::numbers::pi / std::max(std::abs(t), 1.0));
    std::vector<double> breaks{0.0, std::min(1e-3, width), std::min(1e-2, width)};
    for (double u = width; u < u_max; u += width) breaks.push_back(u);
    breaks.push_back(u_max);
    std::sort(breaks.begin(), breaks.end());
    return quad::integrate(f, std::span<const double>(breaks), {1e-11, 0.0, 100000}).value;
  }

  double alpha_;
  bool mirrored_;
};

// Tabulated CDF for bulk evaluation: cubic Hermite interpolation of F with
// slopes given by the density on a uniform grid, exact evaluation elsewhere.
class StableCdfTable {
 public:
  explicit StableCdfTable(StableLaw law, double half_width = StableLaw::kInversionRange, double step = 0.02)
      : law_(law), lo_(-half_width), step_(step) {
    const auto count = static_cast<std::size_t>(std::llround(2.0 * half_width / step)) + 1;
    const auto nodes = parallel_map<std::pair<double, double>>(count, [&](std::size_t i) {
      const double t = lo_ + step_ * static_cast<double>(i);
      return std::pair{law_.cdf(t), law_.density(t)};
    });
    values_.reserve(count);
    slopes_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0 && nodes[i].first < nodes[i - 1].first - 1e-10) {
        throw NumericalError("stable cdf table is not monotone", nodes[i - 1].first - nodes[i].first);
      }
      values_.push_back(nodes[i].first);
      slopes_.push_back(nodes[i].second);
    }
    hi_ = lo_ + step_ * static_cast<double>(count - 1);
  }

  const StableLaw& law() const { return law_; }

  double operator()(double t) const {
    if (!(t >= lo_ && t < hi_)) return law_.cdf(t);
    const double pos = (t - lo_) / step_;
    const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
    const double s = pos - static_cast<double>(i);
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    const double v = h00 * values_[i] + h10 * step_ * slopes_[i] + h01 * values_[i + 1] + h11 * step_ * slopes_[i + 1];
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  StableLaw law_;
  double lo_;
  double hi_;
  double step_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

inline double ks_statistic(std::vector<double> sample, const StableCdfTable& table) {
  return ks_one_sample(std::move(sample), [&](double t) { return table(t); });
}

inline double ks_statistic(std::vector<double> sample, const StableLaw& law) {
  return ks_one_sample(std::move(sample), [&](double t) { return law.cdf(t); });
}

// Writes "t,F" rows on [t_lo, t_hi] with the given step.
inline void write_cdf_csv(std::ostream& out, const StableLaw& law, double t_lo, double t_hi, double step) {
  if (!(step > 0.0) || !(t_hi >= t_lo)) throw DomainError("write_cdf_csv: bad grid");
  const auto count = static_cast<std::size_t>(std::floor((t_hi - t_lo) / step + 1e-9)) + 1;
  const auto values = parallel_map<double>(count, [&](std::size_t i) { return law.cdf(t_lo + step * static_cast<double>(i)); });
  out << "t,F\n";
  out.precision(17);
  for (std::size_t i = 0; i < count; ++i) out << t_lo + step * static_cast<double>(i) << ',' << values[i] << '\n';
}

}  // namespace coalcol
