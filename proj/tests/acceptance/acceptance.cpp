// Acceptance checks. Each criterion prints one PASS/FAIL line with its measured
// statistic next to the pinned tolerance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aalen/aggregation.hpp"
#include "aalen/erm.hpp"
#include "aalen/io.hpp"
#include "aalen/pipeline.hpp"
#include "aalen/risk.hpp"
#include "aalen/simulate.hpp"
#include "aalen/single_index.hpp"
#include "helpers.hpp"

using namespace aalen;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

ScenarioConfig make_scenario(ScenarioKind kind, std::size_t d, std::size_t n, std::uint64_t seed, json truth,
                             json censoring = nullptr) {
  ScenarioConfig c;
  c.kind = kind;
  c.d = d;
  c.n = n;
  c.seed = seed;
  c.truth = std::move(truth);
  c.censoring = std::move(censoring);
  return c;
}

json constant(double v) { return {{"family", "constant"}, {"value", v}}; }

IntensityModel closed(std::size_t d, CovariateFunction f, double sup) {
  ClosedFormIntensity c;
  c.description = "acceptance";
  c.d = d;
  c.value = std::move(f);
  c.sup = sup;
  return IntensityModel::closed_form(std::move(c));
}

IntensityModel difference(const IntensityModel& a, const IntensityModel& b) {
  ClosedFormIntensity c;
  c.description = "difference";
  c.d = a.dimension();
  c.value = [a, b](double t, std::span<const double> x) { return a(t, x) - b(t, x); };
  c.sup = a.sup_bound() + b.sup_bound();
  c.time_breakpoints = merge_breakpoints(a.time_breakpoints(), b.time_breakpoints());
  return IntensityModel::closed_form(std::move(c));
}

Outcome gibbs_optimality(int) {
  const double temps[] = {0.5, 2.0, 8.0};
  const std::size_t sizes[] = {10, 1000};
  Rng rng(101, 0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    std::vector<double> r(3);
    for (double& v : r) v = 0.05 * rng.normal();
    const GibbsOptimality g = verify_gibbs_optimality(r, sizes[(i / 3) % 2], temps[i % 3], 0.01);
    worst = std::max(worst, g.closed_form_objective - g.grid_min_objective);
  }
  return {worst <= 1e-9, "max(closed form - grid min) = " + fmt(worst) + " <= 1e-9 over 50 risk vectors"};
}

Outcome erm_exactness(int threads) {
  double worst_residual = 0.0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  std::size_t fits = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const Dataset data = simulate(make_scenario(ScenarioKind::kCensoredSurvival, 1, 256, 200 + rep,
                                                {{"family", "smooth_separable"}}, constant(0.5)),
                                  threads);
    const ModelCollection coll = build_collection(256, 1, SieveFamily::kPiecewisePoly, {1, 1}, 1.5);
    for (const SieveSpec& spec : coll.specs) {
      const ErmFit f = fit(data, spec, 0.0, 1.0 / 256.0);
      const GramSystem sys = assemble_system(data, spec);
      const Eigen::VectorXd residual = sys.gram * f.coefficients + f.ridge * f.coefficients - sys.moment;
      worst_residual = std::max(worst_residual, residual.cwiseAbs().maxCoeff());
      worst_slack = std::max(worst_slack, near_optimality_audit(data, f, 100, derive_seed(rep, fits)).worst_slack);
      ++fits;
    }
  }
  return {worst_residual <= 1e-8 && worst_slack <= 1e-9,
          std::to_string(fits) + " fits: max residual " + fmt(worst_residual) + " <= 1e-8, max audit slack " +
              fmt(worst_slack) + " <= 0"};
}

Outcome excess_risk(int threads) {
  const ScenarioConfig sc = make_scenario(ScenarioKind::kCensoredSurvival, 1, 50000, 300,
                                          {{"family", "single_index"}, {"index", {1.0}}, {"scale", 0.5}}, constant(0.5));
  const Dataset data = simulate(sc, threads);
  const MuMeasure mu = *closed_form_mu(sc);
  const IntensityModel truth = scenario_truth(sc);
  const std::vector<IntensityModel> models{
      IntensityModel::constant(1, 0.5),
      named_intensity({{"family", "linear"}, {"intercept", 0.2}, {"slope", {0.8}}}, 1),
      named_intensity({{"family", "smooth_separable"}, {"scale", 2.0}}, 1),
      named_intensity({{"family", "cox"}, {"index", {1.0}}, {"scale", 0.3}}, 1),
      closed(1, [](double t, std::span<const double> x) { return 0.6 + 0.4 * std::cos(5.0 * t * x[0]); }, 1.0)};
  double worst = 0.0;
  bool pass = true;
  for (const auto& m : models) {
    const ExcessRiskCheck c = excess_risk_check(mu, m, truth, data);
    const double z = std::abs(c.lhs - c.rhs) / c.mc_se;
    worst = std::max(worst, z);
    pass = pass && std::abs(c.lhs - c.rhs) <= 4.0 * c.mc_se;
  }
  return {pass, "max |excess - norm| / SE = " + fmt(worst) + " <= 4 over 5 models"};
}

Outcome decomposition(int threads) {
  const json truths[] = {{{"family", "smooth_separable"}, {"scale", 1.5}},
                         {{"family", "single_index"}, {"index", {0.6, 0.8}}},
                         {{"family", "aalen"}, {"index", {0.6, 0.8}}}};
  const ScenarioKind kinds[] = {ScenarioKind::kCensoredSurvival, ScenarioKind::kCoxProcess,
                                ScenarioKind::kMarkovTransition};
  double worst = 0.0;
  Rng rng(400, 0);
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    ScenarioConfig sc = make_scenario(kinds[rep % 3], 2, 300, 400 + rep, truths[rep % 3]);
    if (sc.kind == ScenarioKind::kCensoredSurvival) sc.censoring = constant(0.4);
    if (sc.kind == ScenarioKind::kMarkovTransition) sc.return_intensity = constant(1.0);
    const Dataset data = simulate(sc, threads);
    const IntensityModel truth = scenario_truth(sc);
    std::vector<int> m{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
    const SieveSpec spec = testing::pp_spec(m, {1, 1, 1}, 4.0);
    const IntensityModel a = IntensityModel::sieve(spec, testing::random_coefficients(spec.dimension(), rep));
    const double lhs = empirical_risk(data, a) - empirical_risk(data, truth);
    const IntensityModel diff = difference(a, truth);
    const double rhs = empirical_norm_sq(data, diff) - 2.0 / std::sqrt(300.0) * martingale_term(data, diff, truth);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return {worst <= 1e-10, "max |identity gap| = " + fmt(worst) + " <= 1e-10 over 20 datasets"};
}

Outcome bernstein(int threads) {
  const std::vector<double> zs{0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  struct Case {
    ScenarioConfig scenario;
    IntensityModel model;
  };
  const std::vector<Case> cases{
      {make_scenario(ScenarioKind::kCensoredSurvival, 1, 100, 0, {{"family", "smooth_separable"}, {"scale", 2.0}},
                     constant(0.5)),
       closed(1, [](double t, std::span<const double>) { return 1.0 - t; }, 1.0)},
      {make_scenario(ScenarioKind::kCoxProcess, 2, 100, 0, {{"family", "single_index"}, {"index", {0.6, 0.8}}}),
       named_intensity({{"family", "linear"}, {"intercept", 0.5}, {"slope", {1.0, -0.5}}}, 2)}};
  double worst = -std::numeric_limits<double>::infinity();
  bool pass = true;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto rows = bernstein_tail_check(deviation_setup(cases[k].scenario), cases[k].model, zs, 2000, 500 + k, threads);
    for (const auto& r : rows) {
      worst = std::max(worst, r.mc_tail - r.bound - 4.0 * r.mc_se);
      pass = pass && r.mc_tail <= r.bound + 4.0 * r.mc_se;
    }
  }
  return {pass, "max(tail - bound - 4 SE) = " + fmt(worst) + " <= 0 over 2 scenarios x 8 z"};
}

Outcome likelihood_ratio(int) {
  struct Case {
    ScenarioConfig scenario;
    IntensityModel alternative;
  };
  const std::vector<Case> cases{
      {make_scenario(ScenarioKind::kCoxProcess, 1, 20, 0, constant(1.0)),
       named_intensity({{"family", "linear"}, {"intercept", 0.7}, {"slope", {0.6}}}, 1)},
      {make_scenario(ScenarioKind::kCensoredSurvival, 1, 20, 0, {{"family", "smooth_separable"}}, constant(0.5)),
       named_intensity({{"family", "single_index"}, {"index", {1.0}}, {"scale", 0.5}}, 1)}};
  double worst = 0.0;
  bool pass = true;
  std::string means;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const IntensityModel truth = scenario_truth(cases[k].scenario);
    double s1 = 0.0, s2 = 0.0;
    const int reps = 5000;
    for (int r = 0; r < reps; ++r) {
      ScenarioConfig c = cases[k].scenario;
      c.seed = derive_seed(600 + k, static_cast<std::uint64_t>(r));
      const double v = std::exp(log_likelihood_ratio(simulate(c), cases[k].alternative, truth));
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / reps;
    const double se = std::sqrt((s2 / reps - mean * mean) / reps);
    worst = std::max(worst, std::abs(mean - 1.0) / se);
    pass = pass && std::abs(mean - 1.0) <= 4.0 * se;
    means += (k ? ", " : "") + fmt(mean);
  }
  return {pass, "means " + means + "; max |mean - 1| / SE = " + fmt(worst) + " <= 4"};
}

Outcome bias_decay(int) {
  auto f = [](double t, double x) { return std::sin(2 * std::numbers::pi * t) * std::sin(2 * std::numbers::pi * x); };
  std::vector<double> slopes;
  for (std::size_t axis = 0; axis < 2; ++axis) {
    std::vector<double> lx, ly;
    for (int m = 2; m <= 6; ++m) {
      const SieveSpec spec = axis == 0 ? testing::pp_spec({m, 8}, {1, 1}) : testing::pp_spec({8, m}, {1, 1});
      const LocalExpansion p(spec, l2_project(spec, [&](std::span<const double> q) { return f(q[0], q[1]); }, 6));
      double err = 0.0;
      testing::grid_quadrature(2, 8, 3, [&](const std::vector<double>& q, double w) {
        const double r = f(q[0], q[1]) - p.value(q[0], std::span<const double>(q).subspan(1));
        err += w * r * r;
      });
      lx.push_back(static_cast<double>(m));
      ly.push_back(std::log2(std::sqrt(err)));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    slopes.push_back(-sxy / sxx);
  }
  const bool pass = std::all_of(slopes.begin(), slopes.end(), [](double s) { return s >= 1.7 && s <= 2.3; });
  return {pass, "per-axis decay slopes (t, x) = (" + fmt(slopes[0]) + ", " + fmt(slopes[1]) + ") in [1.7, 2.3]"};
}

PipelineConfig smooth_d1_pipeline() {
  PipelineConfig c;
  c.scenario = make_scenario(ScenarioKind::kCensoredSurvival, 1, 0, 0,
                             {{"family", "single_index"}, {"index", {1.0}}, {"scale", 0.5}}, constant(0.3));
  c.family = SieveFamily::kPiecewisePoly;
  c.l = {1};
  c.clip = 1.0;
  return c;
}

Outcome rate_slope(int threads) {
  const std::vector<std::size_t> grid{500, 1000, 2000, 4000, 8000};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  const RateTable t = rate_study(smooth_d1_pipeline(), grid, seeds, threads);
  std::string medians;
  bool monotone = true;
  for (std::size_t i = 0; i < t.summary.size(); ++i) {
    medians += (i ? " " : "") + fmt(t.summary[i].median_risk);
    if (i > 0 && t.summary[i].median_risk > t.summary[i - 1].median_risk) monotone = false;
  }
  return {t.slope >= -0.9 && t.slope <= -0.45,
          "slope " + fmt(t.slope) + " in [-0.9, -0.45]; medians " + medians +
              (monotone ? " (nonincreasing)" : " (not monotone)")};
}

Outcome structure_adaptivity(int threads) {
  PipelineConfig c;
  c.scenario = make_scenario(ScenarioKind::kCensoredSurvival, 3, 8000, 0,
                             {{"family", "single_index"}, {"index", {1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0}}, {"scale", 0.5}},
                             constant(0.3));
  c.family = SieveFamily::kPiecewisePoly;
  c.l = {1};
  c.clip = 1.0;
  c.net_delta = 0.15;
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> np, sim;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    c.scenario.seed = seed;
    c.seed = seed;
    c.eval_seed = seed;
    const Dataset data = simulate(c.scenario, threads);
    c.sim_enabled = false;
    np.push_back(*run_pipeline(c, data, threads).l2_to_truth);
    c.sim_enabled = true;
    sim.push_back(*run_pipeline(c, data, threads).l2_to_truth);
  }
  const double ratio = median(sim) / median(np);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  return {ratio <= 0.8 && minutes < 30.0, "median risk SIM " + fmt(median(sim)) + " / NP " + fmt(median(np)) + " = " +
                                              fmt(ratio) + " <= 0.8 over 20 seeds, runtime " + fmt(minutes) +
                                              " min < 30"};
}

Outcome oracle_surrogate(int threads) {
  PipelineConfig c = smooth_d1_pipeline();
  c.scenario.n = 8000;
  c.evaluate_members = true;
  std::vector<double> agg, best;
  double slack_term = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    c.scenario.seed = seed;
    c.seed = seed;
    c.eval_seed = seed;
    const PipelineResult r = run_pipeline(c, threads);
    const SplitResult& s = r.splits.at(0);
    agg.push_back(*r.l2_to_truth);
    best.push_back(*std::min_element(s.member_l2.begin(), s.member_l2.end()));
    const double m = static_cast<double>(s.member_l2.size());
    slack_term = 5.0 * s.aggregate.temperature * std::log(m) / static_cast<double>(s.aggregate.n);
  }
  const double bound = 2.0 * median(best) + slack_term;
  return {median(agg) <= bound, "median aggregate risk " + fmt(median(agg)) + " <= 2 x " + fmt(median(best)) +
                                    " + " + fmt(slack_term) + " = " + fmt(bound)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(int) {
#ifndef AALEN_CLI_PATH
  return {false, "command-line tool not built"};
#else
  const fs::path root = fs::temp_directory_path() / "aalen_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const json scenario = {{"kind", "censored_survival"},
                         {"d", 2},
                         {"n", 600},
                         {"seed", 8},
                         {"truth", {{"family", "single_index"}, {"index", {0.6, 0.8}}, {"scale", 0.5}}},
                         {"censoring", constant(0.3)}};
  auto write = [&](const std::string& name, const json& j) {
    std::ofstream(root / name, std::ios::binary) << j.dump(2) << '\n';
  };
  write("scenario.json", scenario);
  write("fit.json", {{"scenario", scenario}, {"spec", {{"family", "pp"}, {"m", {1, 1, 1}}, {"l", {1, 1, 1}}, {"clip", 1.0}}}});
  write("aggregate.json", {{"scenario", scenario},
                           {"collection", {{"family", "pp"}, {"l", {1}}, {"clip", 1.0}}},
                           {"sim", {{"enabled", true}, {"delta", 0.4}}},
                           {"jackknife", 2},
                           {"seed", 3},
                           {"evaluation", {{"mc_draws", 1024}, {"members", true}}}});
  write("evaluate.json", {{"model", "run_1/aggregate/model.json"},
                          {"data", "run_1/simulate/dataset.ndjson"},
                          {"scenario", scenario},
                          {"evaluation", {{"mc_draws", 1024}, {"seed", 5}}}});
  json rate = {{"scenario", scenario},
               {"collection", {{"family", "pp"}, {"l", {1}}, {"clip", 1.0}}},
               {"n_grid", {100, 200, 400}},
               {"seeds", {1, 2}},
               {"evaluation", {{"mc_draws", 1024}}}};
  rate["scenario"]["d"] = 1;
  rate["scenario"]["truth"]["index"] = {1.0};
  write("rate.json", rate);

  const std::vector<std::string> commands{"simulate", "fit", "aggregate", "evaluate", "rate-study"};
  const std::vector<std::string> configs{"scenario.json", "fit.json", "aggregate.json", "evaluate.json", "rate.json"};
  const std::vector<std::pair<std::string, int>> runs{{"run_1", 1}, {"run_4", 4}, {"rerun_1", 1}};
  for (const auto& [run, threads] : runs) {
    for (std::size_t k = 0; k < commands.size(); ++k) {
      const std::string cmd = std::string("\"") + AALEN_CLI_PATH + "\" " + commands[k] + " --config \"" +
                              (root / configs[k]).string() + "\" --out \"" + (root / run / commands[k]).string() +
                              "\" --seed 11 --threads " + std::to_string(threads) + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + commands[k]};
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "run_1")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "run_1");
    const std::string bytes = file_bytes(entry.path());
    for (const char* other : {"run_4", "rerun_1"}) {
      if (!fs::exists(root / other / rel) || file_bytes(root / other / rel) != bytes) {
        return {false, rel.string() + " differs in " + other};
      }
    }
    ++compared;
  }
  return {compared == 9, std::to_string(compared) + " output files byte-identical across 1 and 4 threads and reruns"};
#endif
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(int)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("criteria", selected, "criterion numbers to run (default: all)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{{1, "gibbs-optimality", gibbs_optimality},
                                   {2, "erm-exactness", erm_exactness},
                                   {3, "excess-risk-identity", excess_risk},
                                   {4, "risk-decomposition", decomposition},
                                   {5, "bernstein-bound", bernstein},
                                   {6, "likelihood-ratio-mean", likelihood_ratio},
                                   {7, "bias-decay", bias_decay},
                                   {8, "rate-slope", rate_slope},
                                   {9, "structure-adaptivity", structure_adaptivity},
                                   {10, "oracle-inequality", oracle_surrogate},
                                   {11, "cli-determinism", cli_determinism}};
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(threads);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << c.id << " " << c.name << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
              << "; " << fmt(secs) << " s)" << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
