#include "aalen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "aalen/erm.hpp"
#include "aalen/error.hpp"
#include "aalen/io.hpp"
#include "aalen/parallel.hpp"
#include "aalen/risk.hpp"
#include "aalen/rng.hpp"

namespace aalen {
namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> degree_list(const json& j) {
  if (j.is_number_integer()) return {j.get<int>()};
  return j.get<std::vector<int>>();
}

ModelCollection nonparametric_collection(const PipelineConfig& config, std::size_t n, std::size_t d) {
  const std::vector<int> l = broadcast_degrees(config.l, d + 1);
  if (config.resolutions.empty()) return build_collection(n, d, config.family, l, config.clip);
  ModelCollection c;
  c.n = n;
  for (const auto& m : config.resolutions) {
    SieveSpec s;
    s.family = config.family;
    s.d = d;
    s.m = m;
    s.l = config.family == SieveFamily::kHaar ? std::vector<int>(d + 1, 1) : l;
    s.clip = config.clip;
    validate(s);
    c.specs.push_back(std::move(s));
  }
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 == 1 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

std::vector<int> broadcast_degrees(const std::vector<int>& l, std::size_t axes) {
  require(!l.empty(), ErrorCode::kInvalidArgument, "degree list is empty");
  if (l.size() == 1) return std::vector<int>(axes, l.front());
  require(l.size() == axes, ErrorCode::kDimensionMismatch,
          "degree list needs 1 or " + std::to_string(axes) + " entries");
  return l;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kParse, "pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    if (j.contains("scenario")) {
      c.scenario = scenario_from_json(j.at("scenario"));
      c.seed = c.scenario.seed;
    } else {
      c.has_scenario = false;
    }
    if (j.contains("collection")) {
      const json& col = j.at("collection");
      c.family = sieve_family_from_string(col.value("family", std::string("pp")));
      if (col.contains("l")) c.l = degree_list(col.at("l"));
      c.clip = col.value("clip", c.clip);
      if (col.contains("m")) c.resolutions = col.at("m").get<std::vector<std::vector<int>>>();
    }
    if (j.contains("sim")) {
      const json& sim = j.at("sim");
      c.sim_enabled = sim.value("enabled", true);
      if (sim.contains("delta") && !sim.at("delta").is_null()) c.net_delta = sim.at("delta").get<double>();
      c.net_cap = sim.value("cap", c.net_cap);
      if (sim.contains("l")) c.sim_l = degree_list(sim.at("l"));
    }
    if (j.contains("temperature") && !j.at("temperature").is_null()) c.temperature = j.at("temperature").get<double>();
    c.jackknife = j.value("jackknife", 1);
    if (j.contains("split_seeds")) c.split_seeds = j.at("split_seeds").get<std::vector<std::uint64_t>>();
    c.seed = j.value("seed", c.seed);
    c.ridge = j.value("ridge", 0.0);
    if (j.contains("rho") && !j.at("rho").is_null()) c.rho = j.at("rho").get<double>();
    if (j.contains("evaluation")) {
      const json& ev = j.at("evaluation");
      c.quad_nodes = ev.value("quad_nodes", c.quad_nodes);
      c.mc_draws = ev.value("mc_draws", c.mc_draws);
      c.eval_seed = ev.value("seed", c.eval_seed);
      c.fallback_factor = ev.value("fallback_factor", c.fallback_factor);
      c.evaluate_members = ev.value("members", false);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("pipeline config: ") + e.what());
  }
  require(c.jackknife >= 1, ErrorCode::kInvalidArgument, "jackknife J must be >= 1");
  require(c.split_seeds.empty() || c.split_seeds.size() == static_cast<std::size_t>(c.jackknife),
          ErrorCode::kInvalidArgument, "split_seeds must list J seeds");
  require(c.clip > 0.0, ErrorCode::kInvalidArgument, "clip must be > 0");
  require(c.quad_nodes >= 1 && c.quad_nodes <= kMaxQuadratureNodes, ErrorCode::kInvalidArgument,
          "quad_nodes out of range");
  return c;
}

json to_json(const PipelineConfig& c) {
  json j;
  if (c.has_scenario) j["scenario"] = to_json(c.scenario);
  j["collection"] = {{"family", c.family == SieveFamily::kHaar ? "haar" : "pp"},
                     {"l", c.l},
                     {"clip", c.clip}};
  if (!c.resolutions.empty()) j["collection"]["m"] = c.resolutions;
  j["sim"] = {{"enabled", c.sim_enabled},
              {"delta", c.net_delta ? json(*c.net_delta) : json(nullptr)},
              {"cap", c.net_cap}};
  if (!c.sim_l.empty()) j["sim"]["l"] = c.sim_l;
  j["temperature"] = c.temperature ? json(*c.temperature) : json(nullptr);
  j["jackknife"] = c.jackknife;
  if (!c.split_seeds.empty()) j["split_seeds"] = c.split_seeds;
  j["seed"] = c.seed;
  j["ridge"] = c.ridge;
  j["rho"] = c.rho ? json(*c.rho) : json(nullptr);
  j["evaluation"] = {{"quad_nodes", c.quad_nodes},
                     {"mc_draws", c.mc_draws},
                     {"seed", c.eval_seed},
                     {"fallback_factor", c.fallback_factor},
                     {"members", c.evaluate_members}};
  return j;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t total, std::uint64_t seed) {
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0);
  for (std::size_t i = total; i > 1; --i) {
    const auto k = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[k]);
  }
  const std::size_t half = total / 2;
  std::vector<std::size_t> training(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> learning(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
  return {std::move(training), std::move(learning)};
}

PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data, int threads) {
  require(data.size() >= 2, ErrorCode::kEmptyDataset, "the pipeline needs at least 2 records");
  require(config.jackknife >= 1, ErrorCode::kInvalidArgument, "jackknife must be >= 1");
  require(config.split_seeds.empty() || config.split_seeds.size() == static_cast<std::size_t>(config.jackknife),
          ErrorCode::kInvalidArgument, "split_seeds must list one seed per jackknife split");
  const std::size_t d = data.d();
  const std::size_t n = data.size() / 2;
  const double temperature = config.temperature.value_or(default_temperature(config.clip));
  const double rho = config.rho.value_or(1.0 / static_cast<double>(n));
  PipelineResult result;

  std::optional<IntensityModel> truth;
  std::optional<MuMeasure> mu;
  if (config.has_scenario) {
    truth = scenario_truth(config.scenario);
    require(config.scenario.d == d, ErrorCode::kDimensionMismatch, "scenario d differs from data d");
    mu = evaluation_mu(config.scenario, config.fallback_factor * n, derive_seed(config.eval_seed, 1), threads);
  }

  std::vector<AggregateFit> aggregates;
  for (int j = 0; j < config.jackknife; ++j) {
    SplitResult split;
    split.split_seed = config.split_seeds.empty() ? derive_seed(config.seed, static_cast<std::uint64_t>(j))
                                                  : config.split_seeds[static_cast<std::size_t>(j)];
    std::tie(split.training, split.learning) = split_indices(data.size(), split.split_seed);
    const Dataset training = data.subset(split.training);
    const Dataset learning = data.subset(split.learning);
    const TimeMomentCache cache(training);

    const ModelCollection np = nonparametric_collection(config, training.size(), d);
    std::vector<std::optional<DictionaryEntry>> slots(np.specs.size());
    std::vector<std::string> errors(np.specs.size());
    parallel_for(np.specs.size(), threads, [&](std::size_t k) {
      try {
        const ErmFit f = fit(training, np.specs[k], config.ridge, rho, kDefaultQuadNodes, &cache);
        json prov = to_json(np.specs[k]);
        prov["kind"] = "nonparametric";
        prov["achieved_risk"] = f.achieved_risk;
        prov["rho_certificate"] = f.rho_certificate;
        prov["gram_condition"] = finite_or_null(f.gram_condition);
        prov["ridge"] = f.ridge;
        slots[k] = DictionaryEntry{f.model(), std::move(prov)};
      } catch (const Error& e) {
        errors[k] = e.what();
      }
    });
    Dictionary dictionary;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (slots[k]) {
        dictionary.push_back(std::move(*slots[k]));
      } else {
        result.warnings.push_back("skipped nonparametric fit " + std::to_string(k) + ": " + errors[k]);
      }
    }

    if (config.sim_enabled && d >= 2) {
      const double delta = config.net_delta.value_or(default_net_delta(training.size()));
      const SphereNet net = build_net(d, delta, config.net_cap);
      const std::vector<int> sim_l =
          config.sim_l.empty() ? std::vector<int>{broadcast_degrees(config.l, d + 1)[0], broadcast_degrees(config.l, d + 1)[1]}
                               : broadcast_degrees(config.sim_l, 2);
      const ModelCollection sim = build_collection(training.size(), 1, config.family, sim_l, config.clip);
      Dictionary extra = build_sim_dictionary(training, net, sim, config.ridge, rho, threads, &cache, &result.warnings);
      for (auto& e : extra) dictionary.push_back(std::move(e));
    }
    require(!dictionary.empty(), ErrorCode::kSingularSystem, "every dictionary fit failed");

    split.aggregate = aggregate(std::move(dictionary), learning, temperature, threads, config.quad_nodes);
    if (config.evaluate_members && truth) {
      split.member_l2.resize(split.aggregate.dictionary.size());
      parallel_for(split.member_l2.size(), threads, [&](std::size_t k) {
        split.member_l2[k] = l2mu_distance_sq(*mu, split.aggregate.dictionary[k].model, *truth, config.quad_nodes,
                                              config.mc_draws, config.eval_seed);
      });
    }
    aggregates.push_back(split.aggregate);
    result.splits.push_back(std::move(split));
  }
  result.model = jackknife(aggregates);
  if (truth) {
    result.l2_to_truth = l2mu_distance_sq(*mu, result.model, *truth, config.quad_nodes, config.mc_draws,
                                          config.eval_seed);
  }

  json splits = json::array();
  for (const auto& s : result.splits) {
    json members = json::array();
    for (std::size_t k = 0; k < s.aggregate.dictionary.size(); ++k) {
      json m = {{"provenance", s.aggregate.dictionary[k].provenance},
                {"learning_risk", s.aggregate.learning_risks[k]},
                {"weight", s.aggregate.weights[k]}};
      if (!s.member_l2.empty()) m["l2_risk"] = s.member_l2[k];
      members.push_back(std::move(m));
    }
    splits.push_back({{"split_seed", s.split_seed},
                      {"training_size", s.training.size()},
                      {"learning_size", s.learning.size()},
                      {"members", std::move(members)}});
  }
  result.report = {{"n", n},
                   {"d", d},
                   {"temperature", temperature},
                   {"rho", rho},
                   {"jackknife", config.jackknife},
                   {"splits", std::move(splits)},
                   {"warnings", result.warnings},
                   {"l2_to_truth", result.l2_to_truth ? json(*result.l2_to_truth) : json(nullptr)}};
  if (mu) result.report["evaluation_measure"] = mu->is_empirical() ? "empirical" : "closed_form";
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& config, int threads) {
  require(config.has_scenario, ErrorCode::kInvalidArgument, "no scenario to simulate and no dataset given");
  return run_pipeline(config, simulate(config.scenario, threads), threads);
}

RateTable summarize_rate_table(std::vector<RateRow> rows) {
  RateTable table;
  std::sort(rows.begin(), rows.end(),
            [](const RateRow& a, const RateRow& b) { return a.n != b.n ? a.n < b.n : a.seed < b.seed; });
  std::map<std::size_t, std::vector<double>> by_n;
  for (const auto& r : rows) by_n[r.n].push_back(r.risk);
  for (const auto& [n, risks] : by_n) table.summary.push_back({n, median(risks)});
  table.rows = std::move(rows);
  const std::size_t k = table.summary.size();
  if (k >= 2) {
    double mx = 0.0;
    double my = 0.0;
    for (const auto& s : table.summary) {
      mx += std::log(static_cast<double>(s.n));
      my += std::log(s.median_risk);
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& s : table.summary) {
      const double dx = std::log(static_cast<double>(s.n)) - mx;
      sxy += dx * (std::log(s.median_risk) - my);
      sxx += dx * dx;
    }
    table.slope = sxy / sxx;
  } else {
    table.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

RateTable rate_study(const PipelineConfig& config_template, std::span<const std::size_t> n_grid,
                     std::span<const std::uint64_t> seeds, int threads) {
  require(n_grid.size() >= 3, ErrorCode::kInvalidArgument, "rate study needs at least 3 sample sizes");
  require(std::is_sorted(n_grid.begin(), n_grid.end()) &&
              std::adjacent_find(n_grid.begin(), n_grid.end()) == n_grid.end(),
          ErrorCode::kInvalidArgument, "n_grid must be strictly increasing");
  require(!seeds.empty(), ErrorCode::kInvalidArgument, "rate study needs at least one seed");
  require(config_template.has_scenario, ErrorCode::kInvalidArgument, "rate study needs a scenario");
  std::vector<RateRow> rows;
  for (std::size_t n : n_grid) {
    for (std::uint64_t seed : seeds) {
      PipelineConfig c = config_template;
      c.scenario.n = 2 * n;
      c.scenario.seed = seed;
      c.seed = seed;
      c.split_seeds.clear();
      c.eval_seed = derive_seed(seed, n);
      const PipelineResult r = run_pipeline(c, threads);
      rows.push_back({n, seed, *r.l2_to_truth});
    }
  }
  return summarize_rate_table(std::move(rows));
}

void write_rate_rows_csv(std::ostream& out, const RateTable& table) {
  out << "n,seed,risk\n";
  for (const auto& r : table.rows) out << r.n << ',' << r.seed << ',' << format_double(r.risk) << '\n';
}

void write_rate_summary_csv(std::ostream& out, const RateTable& table) {
  out << "n,median_risk\n";
  for (const auto& s : table.summary) out << s.n << ',' << format_double(s.median_risk) << '\n';
  out << "slope," << format_double(table.slope) << '\n';
}

}  // namespace aalen
