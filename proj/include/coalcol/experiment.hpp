#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalcol/bounds.hpp"
#include "coalcol/chain.hpp"
#include "coalcol/error.hpp"
#include "coalcol/measure.hpp"
#include "coalcol/parallel.hpp"
#include "coalcol/random.hpp"
#include "coalcol/rates.hpp"
#include "coalcol/stable.hpp"
#include "coalcol/stats.hpp"
#include "coalcol/version.hpp"

namespace coalcol {

enum class ExperimentKind { lln, stable_limit, green_kernel, moments, dominance, convergence_diagnostics };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::lln: return "lln";
    case ExperimentKind::stable_limit: return "stable_limit";
    case ExperimentKind::green_kernel: return "green_kernel";
    case ExperimentKind::moments: return "moments";
    case ExperimentKind::dominance: return "dominance";
    case ExperimentKind::convergence_diagnostics: return "convergence_diagnostics";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::lln, ExperimentKind::stable_limit, ExperimentKind::green_kernel,
                 ExperimentKind::moments, ExperimentKind::dominance, ExperimentKind::convergence_diagnostics}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown experiment '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::lln;
  nlohmann::json measure_json;
  std::vector<long> n_values;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::optional<BoundParams> params;
  std::filesystem::path output_dir = ".";

  long n_max_exact = kDefaultMaxExact;
  double ks_threshold = 0.03;          // stable_limit: KS bound at the largest n
  double ks_jitter = 0.2;              // stable_limit: allowed relative increase between grid points
  std::optional<double> k_exponent;    // dominance: k = floor(n^k_exponent), default upsilon
  long h = 10000;                      // dominance: number of summed bounding jumps
  std::size_t sum_replicates = 5000;   // dominance: replicates of the bounding sums
  std::size_t coupling_draws = 1000000;
  double sum_ks_threshold = 0.05;
  ConstraintSet constraint_set = ConstraintSet::stable_limit;

  LambdaMeasure measure() const {
    try {
      return LambdaMeasure::from_json(measure_json);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid measure: ") + e.what());
    }
  }

  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    ExperimentConfig c;
    try {
      c.experiment = experiment_kind_from_string(j.at("experiment").get<std::string>());
      if (j.contains("measure")) {
        c.measure_json = j.at("measure");
      } else if (j.contains("measure_file")) {
        const auto path = base_dir / j.at("measure_file").get<std::string>();
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open measure file " + path.string());
        c.measure_json = nlohmann::json::parse(in);
      } else {
        throw ConfigError("config needs 'measure' or 'measure_file'");
      }
      c.n_values = j.at("n_values").get<std::vector<long>>();
      if (j.contains("replicates")) {
        const auto r = j.at("replicates").get<long long>();
        if (r < 1) throw ConfigError("replicates must be at least 1");
        c.replicates = static_cast<std::size_t>(r);
      }
      if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("params")) c.params = BoundParams::from_json(j.at("params"));
      if (j.contains("output_dir")) {
        const std::filesystem::path out = j.at("output_dir").get<std::string>();
        c.output_dir = out.is_absolute() ? out : base_dir / out;
      } else {
        c.output_dir = base_dir;
      }
      if (j.contains("n_max_exact")) c.n_max_exact = j.at("n_max_exact").get<long>();
      if (j.contains("ks_threshold")) c.ks_threshold = j.at("ks_threshold").get<double>();
      if (j.contains("ks_jitter")) c.ks_jitter = j.at("ks_jitter").get<double>();
      if (j.contains("k_exponent")) c.k_exponent = j.at("k_exponent").get<double>();
      if (j.contains("h")) c.h = j.at("h").get<long>();
      if (j.contains("sum_replicates")) c.sum_replicates = j.at("sum_replicates").get<std::size_t>();
      if (j.contains("coupling_draws")) c.coupling_draws = j.at("coupling_draws").get<std::size_t>();
      if (j.contains("sum_ks_threshold")) c.sum_ks_threshold = j.at("sum_ks_threshold").get<double>();
      if (j.contains("constraint_set")) {
        c.constraint_set = constraint_set_from_string(j.at("constraint_set").get<std::string>());
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
    if (c.n_values.empty()) throw ConfigError("n_values must be nonempty");
    for (long n : c.n_values) {
      if (n < 1) throw ConfigError("n_values must be positive");
    }
    if (c.h < 1) throw ConfigError("h must be at least 1");
    if (c.sum_replicates < 1) throw ConfigError("sum_replicates must be at least 1");
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"experiment", to_string(experiment)},
                     {"measure", measure_json},
                     {"n_values", n_values},
                     {"replicates", replicates},
                     {"seed", seed},
                     {"n_max_exact", n_max_exact}};
    switch (experiment) {
      case ExperimentKind::stable_limit:
        j["ks_threshold"] = ks_threshold;
        j["ks_jitter"] = ks_jitter;
        break;
      case ExperimentKind::dominance:
        if (params) j["params"] = params->to_json();
        if (k_exponent) j["k_exponent"] = *k_exponent;
        j["h"] = h;
        j["sum_replicates"] = sum_replicates;
        j["coupling_draws"] = coupling_draws;
        j["sum_ks_threshold"] = sum_ks_threshold;
        j["constraint_set"] = to_string(constraint_set);
        break;
      default:
        break;
    }
    return j;
  }
};

// Consolidated result of one run; `json` is what gets written to disk.
struct ExperimentReport {
  nlohmann::json json;
  bool passed = true;
};

namespace detail {

class ReportBuilder {
 public:
  explicit ReportBuilder(const ExperimentConfig& config) : config_(config) {
    std::filesystem::create_directories(config.output_dir);
    json_["schema_version"] = 1;
    json_["experiment"] = to_string(config.experiment);
    json_["config"] = config.to_json();
    json_["provenance"] = {{"library", "coalcol"}, {"version", kVersion}, {"seed", config.seed}};
    json_["results"] = nlohmann::json::array();
    json_["checks"] = nlohmann::json::array();
    json_["files"] = nlohmann::json::array();
  }

  void result(nlohmann::json r) { json_["results"].push_back(std::move(r)); }

  void check(const std::string& name, bool passed, std::optional<double> value = std::nullopt,
             std::optional<double> threshold = std::nullopt) {
    nlohmann::json c{{"name", name}, {"passed", passed}};
    c["value"] = value && std::isfinite(*value) ? nlohmann::json(*value) : nlohmann::json(nullptr);
    c["threshold"] = threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr);
    json_["checks"].push_back(std::move(c));
    passed_ = passed_ && passed;
  }

  void note(const std::string& key, nlohmann::json value) { json_[key] = std::move(value); }

  std::ofstream open(const std::string& name) {
    const auto path = config_.output_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    json_["files"].push_back(name);
    return out;
  }

  ExperimentReport finish() {
    json_["passed"] = passed_;
    const auto path = config_.output_dir / (to_string(config_.experiment) + "_report.json");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << json_.dump(2) << '\n';
    return {json_, passed_};
  }

 private:
  const ExperimentConfig& config_;
  nlohmann::json json_;
  bool passed_ = true;
};

inline std::string file_name(ExperimentKind k, long n, const std::string& ext = "csv") {
  return to_string(k) + "_n" + std::to_string(n) + "." + ext;
}

inline long max_n(const ExperimentConfig& c) { return *std::max_element(c.n_values.begin(), c.n_values.end()); }

inline std::optional<MeasureAsymptotics> try_asymptotics(const LambdaMeasure& m) {
  try {
    return asymptotics_of(m);
  } catch (const UnsupportedMeasure&) {
    return std::nullopt;
  }
}

inline MeasureAsymptotics require_asymptotics(const LambdaMeasure& m, const std::string& experiment) {
  try {
    return asymptotics_of(m);
  } catch (const UnsupportedMeasure& e) {
    throw ConfigError(experiment + " needs a measure with a power law of exponent in (0, 1) near 0: " + e.what());
  }
}

inline void require_exact_size(const ExperimentConfig& c) {
  if (max_n(c) > c.n_max_exact) {
    throw ConfigError("n=" + std::to_string(max_n(c)) + " exceeds n_max_exact=" + std::to_string(c.n_max_exact));
  }
}

// Simulated C_n for replicates 0..count-1; replicate r uses stream (seed, r).
inline std::vector<long> simulate_replicates(const RateTable& table, long n, std::uint64_t seed, std::size_t count) {
  return parallel_map<long>(count, [&](std::size_t r) {
    RngStream rng(seed, r);
    return simulate_collisions(table, n, rng);
  });
}

inline void write_samples(std::ostream& out, long n, const std::vector<long>& collisions) {
  out << "n,replicate,collisions,landing_state\n";
  for (std::size_t r = 0; r < collisions.size(); ++r) out << n << ',' << r << ',' << collisions[r] << ",1\n";
}

// True when each value is at most (1 + jitter) times its predecessor.
inline bool decreasing_with_jitter(const std::vector<double>& v, double jitter) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > (1.0 + jitter) * v[i - 1]) return false;
  }
  return true;
}

inline std::string n_label(long n) { return "n=" + std::to_string(n); }

}  // namespace detail

// Law of large numbers: mean(C_n)/n against 1 - alpha.
inline ExperimentReport run_lln(const ExperimentConfig& config) {
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::try_asymptotics(measure);
  detail::ReportBuilder report(config);
  RateTable table(measure, std::max(2L, detail::max_n(config)));
  for (long n : config.n_values) {
    const auto samples = detail::simulate_replicates(table, n, config.seed, config.replicates);
    {
      auto out = report.open(detail::file_name(config.experiment, n));
      detail::write_samples(out, n, samples);
    }
    std::vector<double> ratios(samples.begin(), samples.end());
    for (double& r : ratios) r /= static_cast<double>(n);
    const auto s = summarize(ratios);
    nlohmann::json r{{"n", n}, {"mean_ratio", s.mean}, {"std_error", s.std_error}};
    if (asym) {
      const double target = 1.0 - asym->alpha;
      const double diff = std::abs(s.mean - target);
      r["target"] = target;
      r["abs_diff"] = diff;
      const bool passed = diff <= 3.0 * s.std_error + 0.01;
      r["passed"] = passed;
      report.check(detail::n_label(n) + ": |mean(C_n)/n - (1-alpha)| <= 3 SE + 0.01", passed, diff,
                   3.0 * s.std_error + 0.01);
    } else {
      r["target"] = nullptr;
      r["abs_diff"] = nullptr;
      r["passed"] = nullptr;
    }
    if (n <= config.n_max_exact) {
      const double exact = exact_moments(table, n, config.n_max_exact).mean / static_cast<double>(n);
      const double tol = 3.0 * s.std_error + 1e-9;
      r["exact_mean_ratio"] = exact;
      report.check(detail::n_label(n) + ": Monte Carlo mean within 3 SE of exact mean", std::abs(s.mean - exact) <= tol,
                   std::abs(s.mean - exact), tol);
    }
    report.result(std::move(r));
  }
  return report.finish();
}

// Normalized collision counts against the stable limit law.
inline ExperimentReport run_stable_limit(const ExperimentConfig& config) {
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::require_asymptotics(measure, "stable_limit");
  const double need = stable_limit_varsigma_threshold(asym.alpha);
  if (!(asym.varsigma > need)) {
    throw ConfigError("stable_limit needs varsigma > max{(2-alpha)^2/(5-5alpha+alpha^2), 1-alpha} = " +
                      std::to_string(need) + ", measure has " + std::to_string(asym.varsigma));
  }
  const double alpha = asym.alpha;
  detail::ReportBuilder report(config);
  RateTable table(measure, std::max(2L, detail::max_n(config)));
  const StableCdfTable cdf{StableLaw(alpha)};
  std::vector<long> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  std::vector<double> ks_values;
  for (long n : ns) {
    const auto samples = detail::simulate_replicates(table, n, config.seed, config.replicates);
    {
      auto out = report.open(detail::file_name(config.experiment, n));
      detail::write_samples(out, n, samples);
    }
    const double nd = static_cast<double>(n);
    const double scale = (1.0 - alpha) * std::pow(nd, 1.0 / (2.0 - alpha));
    std::vector<double> normalized;
    normalized.reserve(samples.size());
    for (long c : samples) normalized.push_back((static_cast<double>(c) - (1.0 - alpha) * nd) / scale);
    const auto s = summarize(normalized);
    const double ks = ks_statistic(normalized, cdf);
    ks_values.push_back(ks);
    report.result({{"n", n},
                   {"ks", ks},
                   {"mean", s.mean},
                   {"third_central_moment", s.third_central},
                   {"left_skewed", s.third_central < 0.0}});
  }
  report.check("KS at n=" + std::to_string(ns.back()) + " below threshold", ks_values.back() < config.ks_threshold,
               ks_values.back(), config.ks_threshold);
  if (ks_values.size() > 1) {
    report.check("KS decreasing along the n grid (relative jitter " + std::to_string(config.ks_jitter) + ")",
                 detail::decreasing_with_jitter(ks_values, config.ks_jitter));
  }
  return report.finish();
}

inline ExperimentReport run_green_kernel(const ExperimentConfig& config) {
  detail::require_exact_size(config);
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::try_asymptotics(measure);
  detail::ReportBuilder report(config);
  RateTable table(measure, std::max(2L, detail::max_n(config)));
  std::vector<long> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  std::vector<double> half_gaps;
  for (long n : ns) {
    const auto kernel = green_kernel(table, n, config.n_max_exact);
    {
      auto out = report.open(detail::file_name(config.experiment, n));
      out << "b,g\n";
      for (long b = 1; b <= n; ++b) out << b << ',' << kernel(b) << '\n';
    }
    const double conservation = std::abs(kernel(1) - 1.0);
    const bool bounded = std::all_of(kernel.g.begin() + 1, kernel.g.end(),
                                     [](double g) { return g >= -1e-12 && g <= 1.0 + 1e-12; });
    report.check(detail::n_label(n) + ": g(n,1) = 1", conservation <= 1e-10 * static_cast<double>(n), conservation,
                 1e-10 * static_cast<double>(n));
    report.check(detail::n_label(n) + ": 0 <= g <= 1", bounded);
    nlohmann::json r{{"n", n}, {"g_half", n >= 2 ? kernel(n / 2) : 1.0}};
    if (asym && n >= 2) {
      const double gap = std::abs(kernel(n / 2) - (1.0 - asym->alpha));
      r["g_half_gap"] = gap;
      half_gaps.push_back(gap);
    }
    report.result(std::move(r));
  }
  if (half_gaps.size() > 1) {
    report.check("|g(n, n/2) - (1-alpha)| decreasing along the n grid", detail::decreasing_with_jitter(half_gaps, 0.0));
  }
  return report.finish();
}

inline ExperimentReport run_moments(const ExperimentConfig& config) {
  detail::require_exact_size(config);
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::try_asymptotics(measure);
  detail::ReportBuilder report(config);
  RateTable table(measure, std::max(2L, detail::max_n(config)));
  std::vector<long> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  std::vector<double> scaled_variances;
  for (long n : ns) {
    const auto m = exact_moments(table, n, config.n_max_exact);
    const double nd = static_cast<double>(n);
    nlohmann::json r{{"n", n},
                     {"mean", m.mean},
                     {"second_moment", m.second_moment},
                     {"variance", m.variance()},
                     {"mean_over_n", m.mean / nd},
                     {"variance_over_n2", m.variance() / (nd * nd)}};
    scaled_variances.push_back(m.variance() / (nd * nd));
    auto out = report.open(detail::file_name(config.experiment, n));
    if (n <= kDefaultMaxDistribution) {
      const auto pmf = exact_distribution(table, n);
      out << "c,probability\n";
      for (std::size_t c = 0; c < pmf.pmf.size(); ++c) out << c << ',' << pmf.pmf[c] << '\n';
      const double diff = std::abs(pmf.mean() - m.mean);
      report.check(detail::n_label(n) + ": distribution mean matches Green-kernel mean", diff <= 1e-9, diff, 1e-9);
    } else {
      out << "n,mean,second_moment,variance\n" << n << ',' << m.mean << ',' << m.second_moment << ',' << m.variance() << '\n';
    }
    const auto samples = detail::simulate_replicates(table, n, config.seed, config.replicates);
    std::vector<double> xs(samples.begin(), samples.end());
    const auto s = summarize(xs);
    const double tol = 3.0 * s.std_error + 1e-9 * nd;
    r["monte_carlo_mean"] = s.mean;
    r["monte_carlo_std_error"] = s.std_error;
    report.check(detail::n_label(n) + ": Monte Carlo mean within 3 SE of exact mean", std::abs(s.mean - m.mean) <= tol,
                 std::abs(s.mean - m.mean), tol);
    report.result(std::move(r));
  }
  if (asym && scaled_variances.size() > 1) {
    report.check("Var(C_n)/n^2 decreasing along the n grid", detail::decreasing_with_jitter(scaled_variances, 0.0));
  }
  return report.finish();
}

struct BoundingSumSamples {
  std::vector<long> plus;
  std::vector<long> minus;
};

// Replicate r of side s uses stream (seed ^ salt(s), r).
inline BoundingSumSamples bounding_sum_samples(const BoundedJumpLaws& laws, long h, std::uint64_t seed,
                                               std::size_t replicates) {
  auto run = [&](const BoundedJumpLaw& law, std::uint64_t salt) {
    return parallel_map<long>(replicates, [&](std::size_t r) {
      RngStream rng(seed ^ splitmix64(salt), r);
      return bounded_sum_and_hit(law, h, SumMode::sum_h, rng);
    });
  };
  return {run(laws.plus, 1), run(laws.minus, 2)};
}

inline ExperimentReport run_dominance(const ExperimentConfig& config) {
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::require_asymptotics(measure, "dominance");
  const double alpha = asym.alpha;
  const BoundParams params =
      config.params ? *config.params : find_feasible_params(alpha, asym.varsigma, config.constraint_set);
  require_feasible(params, alpha, asym.varsigma, config.constraint_set);
  const double k_exp = config.k_exponent.value_or(params.upsilon);
  detail::ReportBuilder report(config);
  report.note("params", params.to_json());
  RateTable table(measure, std::max(2L, detail::max_n(config)));
  const StableCdfTable mirrored{StableLaw::mirrored(alpha)};
  for (long n : config.n_values) {
    const long k = floor_power(n, k_exp);
    CoupledJumps coupled(table, n, k, params);
    const DominanceReport dom = coupled.verify();
    {
      auto out = report.open(detail::file_name(config.experiment, n, "json"));
      out << dom.to_json().dump(2) << '\n';
    }
    report.check(detail::n_label(n) + ": stochastic dominance verified", dom.verified,
                 static_cast<double>(dom.violations), 0.0);

    long violations = 0;
    if (dom.verified) {
      const auto bad = parallel_map<long>(config.coupling_draws, [&](std::size_t i) {
        RngStream rng(config.seed ^ splitmix64(3), i);
        const long b = k + static_cast<long>(rng.uniform() * static_cast<double>(n - k + 1));
        const auto t = coupled.coupled_triple(std::min(b, n), rng);
        return (t.plus <= t.b && t.b <= t.minus) ? 0L : 1L;
      });
      for (long v : bad) violations += v;
      report.check(detail::n_label(n) + ": coupled triples ordered", violations == 0, static_cast<double>(violations),
                   0.0);
    }

    const long n_fit = std::max(10L, n / 10);
    std::optional<MeanGapCheck> gaps;
    try {
      gaps = mean_gap_check(table, alpha, n, k, params, n_fit);
      report.check(detail::n_label(n) + ": mean gaps within 10x fitted rate bound", gaps->passed);
    } catch (const NotYetValid& e) {
      report.check(detail::n_label(n) + ": mean gaps within 10x fitted rate bound (laws at n/10 not valid)", false);
    }

    const auto sums = bounding_sum_samples({coupled.plus(), coupled.minus()}, config.h, config.seed,
                                           config.sum_replicates);
    auto normalize = [&](const std::vector<long>& v, double centre_mean) {
      std::vector<double> out;
      out.reserve(v.size());
      const double scale = std::pow(static_cast<double>(config.h) / (1.0 - alpha), 1.0 / (2.0 - alpha));
      for (long s : v) out.push_back((static_cast<double>(s) - static_cast<double>(config.h) * centre_mean) / scale);
      return out;
    };
    const double limit_mean = 1.0 / (1.0 - alpha);
    const double ks_plus = ks_statistic(normalize(sums.plus, limit_mean), mirrored);
    const double ks_minus = ks_statistic(normalize(sums.minus, limit_mean), mirrored);
    // Diagnostic only: the same sums centred at their exact finite-n means.
    const double ks_plus_exact = ks_statistic(normalize(sums.plus, coupled.plus().mean_minus_one()), mirrored);
    const double ks_minus_exact = ks_statistic(normalize(sums.minus, coupled.minus().mean_minus_one()), mirrored);
    {
      auto out = report.open(detail::file_name(config.experiment, n));
      out << "n,replicate,side,sum,normalized\n";
      const auto np = normalize(sums.plus, limit_mean);
      const auto nm = normalize(sums.minus, limit_mean);
      for (std::size_t r = 0; r < sums.plus.size(); ++r) out << n << ',' << r << ",plus," << sums.plus[r] << ',' << np[r] << '\n';
      for (std::size_t r = 0; r < sums.minus.size(); ++r) out << n << ',' << r << ",minus," << sums.minus[r] << ',' << nm[r] << '\n';
    }
    report.check(detail::n_label(n) + ": KS of normalized plus-side sums", ks_plus < config.sum_ks_threshold, ks_plus,
                 config.sum_ks_threshold);
    report.check(detail::n_label(n) + ": KS of normalized minus-side sums", ks_minus < config.sum_ks_threshold, ks_minus,
                 config.sum_ks_threshold);

    nlohmann::json r{{"n", n},
                     {"k", k},
                     {"verified", dom.verified},
                     {"violations", dom.violations},
                     {"states_checked", dom.states_checked},
                     {"coupling_violations", violations},
                     {"mean_minus_one_plus", coupled.plus().mean_minus_one()},
                     {"mean_minus_one_minus", coupled.minus().mean_minus_one()},
                     {"ks_plus", ks_plus},
                     {"ks_minus", ks_minus},
                     {"ks_plus_exact_centring", ks_plus_exact},
                     {"ks_minus_exact_centring", ks_minus_exact}};
    if (gaps) {
      r["mean_gaps"] = {{"gap_minus", gaps->gap_minus}, {"gap_plus", gaps->gap_plus},
                        {"bound_minus", gaps->bound_minus}, {"bound_plus", gaps->bound_plus},
                        {"n_fit", gaps->n_fit}, {"k_fit", gaps->k_fit}};
    }
    report.result(std::move(r));
  }
  return report.finish();
}

// Residuals of the finite-n quantities against their limits.
struct ConvergenceRow {
  long n;
  std::vector<double> jump_pmf;  // |q_n(j) - limit|, j = 2..6
  double total_rate;             // |lambda_n n^{alpha-2} - A Gamma(alpha+1)/(2-alpha)|
  double mean_jump;              // |E[J_n - 1] - 1/(1-alpha)|
  double cf;                     // |phi_n(s/m) - expansion|, s = 1, m = 100
  std::optional<double> green;   // g(n, n/2) - (1-alpha)
};

inline std::complex<double> jump_cf_expansion(double alpha, double s, double m) {
  const std::complex<double> omega = std::polar(1.0, std::numbers::pi * alpha * sign_of(s) / 2.0);
  return 1.0 + std::complex<double>(0.0, s / ((1.0 - alpha) * m)) -
         omega * std::pow(std::abs(s), 2.0 - alpha) / ((1.0 - alpha) * std::pow(m, 2.0 - alpha));
}

inline ConvergenceRow convergence_row(const RateTable& table, const MeasureAsymptotics& asym, long n,
                                      long n_max_exact) {
  const double alpha = asym.alpha;
  const double nd = static_cast<double>(n);
  ConvergenceRow row{n, {}, 0.0, 0.0, 0.0, std::nullopt};
  const auto q = table.jump_row(n);
  for (long j = 2; j <= std::min(6L, n - 1); ++j) {
    row.jump_pmf.push_back(std::abs(q[static_cast<std::size_t>(j - 2)] - limit_jump_pmf(alpha, j)));
  }
  row.total_rate = std::abs(table.lambda_total(n) * std::pow(nd, alpha - 2.0) -
                            asym.A * std::tgamma(alpha + 1.0) / (2.0 - alpha));
  row.mean_jump = std::abs(table.mean_jump_minus_one(n) - 1.0 / (1.0 - alpha));
  std::complex<double> phi = 0.0;
  const double u = 1.0 / 100.0;
  for (std::size_t i = 0; i < q.size(); ++i) phi += q[i] * std::polar(1.0, u * static_cast<double>(i + 1));
  row.cf = std::abs(phi - jump_cf_expansion(alpha, 1.0, 100.0));
  if (n <= n_max_exact && n >= 2) row.green = green_kernel(table, n, n_max_exact)(n / 2) - (1.0 - alpha);
  return row;
}

inline ExperimentReport run_convergence_diagnostics(const ExperimentConfig& config) {
  const LambdaMeasure measure = config.measure();
  const auto asym = detail::require_asymptotics(measure, "convergence_diagnostics");
  for (long n : config.n_values) {
    if (n < 7) throw ConfigError("convergence_diagnostics needs n >= 7");
  }
  detail::ReportBuilder report(config);
  RateTable table(measure, detail::max_n(config));
  std::vector<long> ns = config.n_values;
  std::sort(ns.begin(), ns.end());
  std::vector<ConvergenceRow> rows;
  for (long n : ns) {
    rows.push_back(convergence_row(table, asym, n, config.n_max_exact));
    const auto& row = rows.back();
    auto out = report.open(detail::file_name(config.experiment, n));
    out << "quantity,residual\n";
    for (std::size_t i = 0; i < row.jump_pmf.size(); ++i) out << "jump_pmf_j" << i + 2 << ',' << row.jump_pmf[i] << '\n';
    out << "total_rate," << row.total_rate << '\n';
    out << "mean_jump," << row.mean_jump << '\n';
    out << "cf," << row.cf << '\n';
    if (row.green) out << "green_half," << *row.green << '\n';
    nlohmann::json r{{"n", n}, {"jump_pmf", row.jump_pmf}, {"total_rate", row.total_rate},
                     {"mean_jump", row.mean_jump}, {"cf", row.cf}};
    r["green_half"] = row.green ? nlohmann::json(*row.green) : nlohmann::json(nullptr);
    report.result(std::move(r));
  }
  // Decay exponents: log-log slopes over the n grid; residuals at rounding level are left out.
  auto exponent = [&](auto&& pick) -> std::optional<double> {
    std::vector<double> x, y;
    for (const auto& row : rows) {
      const double v = std::abs(pick(row));
      if (v > 1e-12) {
        x.push_back(static_cast<double>(row.n));
        y.push_back(v);
      }
    }
    if (x.size() < 2) return std::nullopt;
    return log_log_slope(x, y);
  };
  auto to_json = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  const auto mean_exp = exponent([](const ConvergenceRow& r) { return r.mean_jump; });
  const auto rate_exp = exponent([](const ConvergenceRow& r) { return r.total_rate; });
  const auto pmf_exp = exponent([](const ConvergenceRow& r) { return r.jump_pmf.empty() ? 0.0 : r.jump_pmf[0]; });
  const auto cf_exp = exponent([](const ConvergenceRow& r) { return r.cf; });
  std::optional<double> green_exp;
  {
    std::vector<double> x, y;
    for (const auto& row : rows) {
      if (row.green && std::abs(*row.green) > 1e-12) {
        x.push_back(static_cast<double>(row.n));
        y.push_back(std::abs(*row.green));
      }
    }
    if (x.size() >= 2) green_exp = log_log_slope(x, y);
  }
  report.note("decay_exponents", {{"mean_jump", to_json(mean_exp)},
                                  {"total_rate", to_json(rate_exp)},
                                  {"jump_pmf_j2", to_json(pmf_exp)},
                                  {"cf", to_json(cf_exp)},
                                  {"green_half", to_json(green_exp)}});
  const double theory = -std::min(1.0 - asym.alpha, asym.varsigma);
  report.note("mean_jump_theory_exponent", theory);
  if (mean_exp) {
    report.check("mean-jump residual decay exponent within 0.1 of -min(1-alpha, varsigma)",
                 std::abs(*mean_exp - theory) <= 0.1, *mean_exp, theory);
  }
  std::vector<double> rate_res, pmf_res;
  for (const auto& r : rows) {
    rate_res.push_back(std::max(r.total_rate, 1e-12));
    pmf_res.push_back(std::max(r.jump_pmf.empty() ? 0.0 : *std::max_element(r.jump_pmf.begin(), r.jump_pmf.end()), 1e-12));
  }
  auto settled = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x <= 1e-12; });
  };
  report.check("total-rate residual decreasing (5% jitter)",
               settled(rate_res) || detail::decreasing_with_jitter(rate_res, 0.05));
  report.check("jump-pmf residual decreasing (5% jitter)", settled(pmf_res) || detail::decreasing_with_jitter(pmf_res, 0.05));
  return report.finish();
}

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case ExperimentKind::lln: return run_lln(config);
    case ExperimentKind::stable_limit: return run_stable_limit(config);
    case ExperimentKind::green_kernel: return run_green_kernel(config);
    case ExperimentKind::moments: return run_moments(config);
    case ExperimentKind::dominance: return run_dominance(config);
    case ExperimentKind::convergence_diagnostics: return run_convergence_diagnostics(config);
  }
  throw ConfigError("unknown experiment");
}

// Rate table export: b, j, lambda_bj for 2 <= j <= b <= b_max.
inline void write_rates_csv(std::ostream& out, const LambdaMeasure& measure, long b_max) {
  if (b_max < 2) throw DomainError("write_rates_csv: b must be at least 2");
  RateTable table(measure, b_max);
  out << "b,j,lambda_bj\n";
  out.precision(17);
  for (long b = 2; b <= b_max; ++b) {
    table.for_each_rate(b, [&](long j, double rate) {
      out << b << ',' << j << ',' << rate << '\n';
      return true;
    });
  }
}

}  // namespace coalcol
