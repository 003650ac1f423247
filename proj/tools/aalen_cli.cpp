// Command-line front end: simulate, fit, aggregate, evaluate, rate-study.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aalen/erm.hpp"
#include "aalen/error.hpp"
#include "aalen/io.hpp"
#include "aalen/pipeline.hpp"
#include "aalen/risk.hpp"
#include "aalen/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "override the configured seed");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

fs::path resolve(const CommonOptions& o, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(o.config).parent_path() / path;
}

fs::path out_dir(const CommonOptions& o) {
  fs::create_directories(o.out);
  return fs::path(o.out);
}

// Dataset named by "data", else simulated from "scenario".
aalen::Dataset obtain_data(const CommonOptions& o, const json& cfg, std::optional<aalen::ScenarioConfig>& scenario) {
  if (cfg.contains("scenario")) {
    scenario = aalen::scenario_from_json(cfg.at("scenario"));
    if (o.seed) scenario->seed = *o.seed;
  }
  if (cfg.contains("data")) return aalen::load_dataset(resolve(o, cfg.at("data").get<std::string>()));
  if (!scenario) aalen::fail(aalen::ErrorCode::kParse, "config needs \"data\" or \"scenario\"");
  return aalen::simulate(*scenario, o.threads);
}

int run_simulate(const CommonOptions& o) {
  aalen::ScenarioConfig s = aalen::scenario_from_json(aalen::load_json(o.config));
  if (o.seed) s.seed = *o.seed;
  const aalen::Dataset data = aalen::simulate(s, o.threads);
  const fs::path dir = out_dir(o);
  aalen::save_dataset(dir / "dataset.ndjson", data);
  aalen::save_json(dir / "scenario.json", aalen::to_json(s));
  std::cout << "simulated " << data.size() << " records into " << (dir / "dataset.ndjson").string() << '\n';
  return 0;
}

int run_fit(const CommonOptions& o) {
  const json cfg = aalen::load_json(o.config);
  std::optional<aalen::ScenarioConfig> scenario;
  const aalen::Dataset data = obtain_data(o, cfg, scenario);
  const aalen::SieveSpec spec = aalen::sieve_spec_from_json(cfg.at("spec"));
  const double ridge = cfg.value("ridge", 0.0);
  const double rho = cfg.contains("rho") && !cfg.at("rho").is_null() ? cfg.at("rho").get<double>()
                                                                     : 1.0 / static_cast<double>(data.size());
  const aalen::ErmFit fit = aalen::fit(data, spec, ridge, rho);
  const fs::path dir = out_dir(o);
  aalen::save_json(dir / "fit.json", aalen::to_json(fit));
  aalen::save_json(dir / "model.json", aalen::to_json(fit.model()));
  std::cout << "achieved risk " << fit.achieved_risk << ", rho certificate " << fit.rho_certificate << '\n';
  return 0;
}

int run_aggregate(const CommonOptions& o) {
  const json cfg = aalen::load_json(o.config);
  aalen::PipelineConfig pc = aalen::pipeline_config_from_json(cfg);
  if (o.seed) {
    pc.scenario.seed = *o.seed;
    pc.seed = *o.seed;
  }
  const aalen::PipelineResult r = cfg.contains("data")
                                      ? aalen::run_pipeline(pc, aalen::load_dataset(resolve(o, cfg.at("data"))), o.threads)
                                      : aalen::run_pipeline(pc, o.threads);
  const fs::path dir = out_dir(o);
  aalen::save_json(dir / "model.json", aalen::to_json(r.model));
  json report = r.report;
  report["config"] = aalen::to_json(pc);
  aalen::save_json(dir / "report.json", report);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  if (r.l2_to_truth) std::cout << "L2(mu) distance to truth " << *r.l2_to_truth << '\n';
  return 0;
}

int run_evaluate(const CommonOptions& o) {
  const json cfg = aalen::load_json(o.config);
  const aalen::IntensityModel model = aalen::model_from_json(aalen::load_json(resolve(o, cfg.at("model"))));
  const json ev = cfg.value("evaluation", json::object());
  const int nodes = ev.value("quad_nodes", aalen::kDefaultQuadNodes);
  const int draws = ev.value("mc_draws", 4096);
  std::uint64_t eval_seed = ev.value("seed", std::uint64_t{0});
  if (o.seed) eval_seed = *o.seed;
  json out = json::object();
  if (cfg.contains("data")) {
    const aalen::Dataset data = aalen::load_dataset(resolve(o, cfg.at("data")));
    const aalen::RiskReport rep = aalen::risk_report(data, model, nodes);
    out["empirical_risk"] = rep.empirical_risk;
    out["empirical_norm_sq"] = rep.empirical_norm_sq;
    out["n"] = rep.n;
  }
  if (cfg.contains("scenario")) {
    const json sj = cfg.at("scenario").is_string() ? aalen::load_json(resolve(o, cfg.at("scenario")))
                                                   : cfg.at("scenario");
    const aalen::ScenarioConfig s = aalen::scenario_from_json(sj);
    const std::size_t fallback = ev.value("fallback_size", std::size_t{10} * std::max<std::size_t>(s.n, 1));
    const aalen::MuMeasure mu = aalen::evaluation_mu(s, fallback, eval_seed, o.threads);
    out["l2_to_truth"] = aalen::l2mu_distance_sq(mu, model, aalen::scenario_truth(s), nodes, draws, eval_seed);
    out["evaluation_measure"] = mu.is_empirical() ? "empirical" : "closed_form";
  }
  aalen::save_json(out_dir(o) / "evaluation.json", out);
  std::cout << out.dump() << '\n';
  return 0;
}

int run_rate_study(const CommonOptions& o) {
  const json cfg = aalen::load_json(o.config);
  const aalen::PipelineConfig pc = aalen::pipeline_config_from_json(cfg);
  const auto n_grid = cfg.at("n_grid").get<std::vector<std::size_t>>();
  auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  if (o.seed) {
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = *o.seed + i;
  }
  const aalen::RateTable table = aalen::rate_study(pc, n_grid, seeds, o.threads);
  const fs::path dir = out_dir(o);
  std::ofstream rows(dir / "rate_study.csv", std::ios::binary);
  aalen::write_rate_rows_csv(rows, table);
  std::ofstream summary(dir / "rate_summary.csv", std::ios::binary);
  aalen::write_rate_summary_csv(summary, table);
  std::cout << "slope " << table.slope << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intensity estimation for counting processes by sieve ERM and exponential-weight aggregation"};
  app.require_subcommand(1);
  CommonOptions sim, fit, agg, eval, rate;
  add_common(app.add_subcommand("simulate", "simulate a scenario into an NDJSON dataset"), sim);
  add_common(app.add_subcommand("fit", "single sieve ERM fit"), fit);
  add_common(app.add_subcommand("aggregate", "split, fit the dictionary, aggregate and jackknife"), agg);
  add_common(app.add_subcommand("evaluate", "empirical risk and L2(mu) distance of a saved model"), eval);
  add_common(app.add_subcommand("rate-study", "pipeline risk over a grid of sample sizes"), rate);
  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("simulate")) return run_simulate(sim);
    if (app.got_subcommand("fit")) return run_fit(fit);
    if (app.got_subcommand("aggregate")) return run_aggregate(agg);
    if (app.got_subcommand("evaluate")) return run_evaluate(eval);
    if (app.got_subcommand("rate-study")) return run_rate_study(rate);
  } catch (const aalen::Error& e) {
    std::cerr << "error [" << aalen::to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
