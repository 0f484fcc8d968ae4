// coalcol: batch runner for collision-count experiments.
//
//   coalcol run <config.json>
//   coalcol rates --measure m.json --b 100 --out rates.csv
//   coalcol stable-cdf --alpha 0.5 --out cdf.csv
//   coalcol check
//
// Exit codes: 0 all checks pass, 2 a check failed, 3 invalid configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coalcol/coalcol.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 2;
constexpr int kExitConfig = 3;

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw coalcol::ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw coalcol::ConfigError(path.string() + ": " + e.what());
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw coalcol::ConfigError("cannot write " + path.string());
  return out;
}

int run_config(const std::string& config_path) {
  const std::filesystem::path path(config_path);
  const auto config = coalcol::ExperimentConfig::from_json(read_json(path), path.parent_path());
  const auto report = coalcol::run_experiment(config);
  for (const auto& check : report.json.at("checks")) {
    std::cout << (check.at("passed").get<bool>() ? "PASS " : "FAIL ") << check.at("name").get<std::string>();
    if (!check.at("value").is_null()) std::cout << "  value=" << check.at("value").dump();
    if (!check.at("threshold").is_null()) std::cout << "  threshold=" << check.at("threshold").dump();
    std::cout << '\n';
  }
  std::cout << "report: " << (config.output_dir / (coalcol::to_string(config.experiment) + "_report.json")).string()
            << '\n';
  return report.passed ? kExitOk : kExitFailed;
}

int run_check() {
  bool all = true;
  for (const auto& outcome : coalcol::checks::invariant_suite()) {
    std::cout << (outcome.passed ? "PASS " : "FAIL ") << outcome.name << "  [" << outcome.detail << "]\n";
    all = all && outcome.passed;
  }
  return all ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision counts of Lambda-coalescents: exact rates, simulation and limit-law checks"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::string measure_path;
  long b_max = 0;
  std::string rates_out;
  auto* rates = app.add_subcommand("rates", "Export merger rates lambda_{b,j} for 2 <= j <= b <= B as CSV");
  rates->add_option("--measure", measure_path, "Measure definition (JSON)")->required();
  rates->add_option("--b", b_max, "Largest number of blocks B")->required();
  rates->add_option("--out", rates_out, "Output CSV")->required();

  double alpha = 0.5;
  double t_lo = -10.0, t_hi = 10.0, t_step = 0.01;
  bool mirrored = false;
  std::string cdf_out;
  auto* cdf = app.add_subcommand("stable-cdf", "Tabulate the CDF of the limit stable law as CSV");
  cdf->add_option("--alpha", alpha, "Coalescent exponent alpha in (0, 1)")->required();
  cdf->add_option("--out", cdf_out, "Output CSV")->required();
  cdf->add_option("--from", t_lo, "First grid point");
  cdf->add_option("--to", t_hi, "Last grid point");
  cdf->add_option("--step", t_step, "Grid spacing");
  cdf->add_flag("--mirrored", mirrored, "Tabulate the mirrored (right-skewed) law instead");

  app.add_subcommand("check", "Run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return run_config(config_path);
    if (*rates) {
      const auto measure = coalcol::LambdaMeasure::from_json(read_json(measure_path));
      auto out = open_output(rates_out);
      coalcol::write_rates_csv(out, measure, b_max);
      return kExitOk;
    }
    if (*cdf) {
      const coalcol::StableLaw law(alpha, mirrored);
      auto out = open_output(cdf_out);
      coalcol::write_cdf_csv(out, law, t_lo, t_hi, t_step);
      return kExitOk;
    }
    return run_check();
  } catch (const coalcol::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const coalcol::InfeasibleParams& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const coalcol::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const coalcol::ResourceLimit& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}
