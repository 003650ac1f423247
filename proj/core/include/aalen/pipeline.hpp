#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aalen/aggregation.hpp"
#include "aalen/sieves.hpp"
#include "aalen/simulate.hpp"
#include "aalen/single_index.hpp"

namespace aalen {

struct PipelineConfig {
  // Scenario of the whole sample; scenario.n = 2n records.
  ScenarioConfig scenario;
  bool has_scenario = true;

  SieveFamily family = SieveFamily::kPiecewisePoly;
  std::vector<int> l{1};  // one entry broadcasts to every axis
  double clip = 1.0;
  std::vector<std::vector<int>> resolutions;  // explicit m list overriding build_collection

  bool sim_enabled = false;
  std::optional<double> net_delta;  // default (n log n)^{-1/2}
  std::size_t net_cap = kDefaultNetCap;
  std::vector<int> sim_l;  // degrees of the 2-dimensional link sieves; default from l

  std::optional<double> temperature;  // default 4 clip^2
  int jackknife = 1;
  std::vector<std::uint64_t> split_seeds;  // default derive_seed(seed, j)
  std::uint64_t seed = 0;
  double ridge = 0.0;
  std::optional<double> rho;  // default 1/n

  int quad_nodes = kDefaultQuadNodes;
  int mc_draws = 4096;
  std::uint64_t eval_seed = 0;
  std::size_t fallback_factor = 10;  // empirical mu size, in units of n
  bool evaluate_members = false;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);

struct SplitResult {
  std::uint64_t split_seed = 0;
  std::vector<std::size_t> training;  // positions in the full sample
  std::vector<std::size_t> learning;
  AggregateFit aggregate;
  std::vector<double> member_l2;  // filled when evaluate_members and a truth is known
};

struct PipelineResult {
  IntensityModel model;
  std::vector<SplitResult> splits;
  std::optional<double> l2_to_truth;
  std::vector<std::string> warnings;
  nlohmann::json report;
};

// Seeded permutation of [0, total); first half training, rest learning.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t total, std::uint64_t seed);

// The per-axis degree vector for `axes` axes.
std::vector<int> broadcast_degrees(const std::vector<int>& l, std::size_t axes);

PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data, int threads = 1);
// Simulates the 2n records of config.scenario first.
PipelineResult run_pipeline(const PipelineConfig& config, int threads = 1);

struct RateRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double risk = 0.0;
};

struct RateSummaryRow {
  std::size_t n = 0;
  double median_risk = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;
  std::vector<RateSummaryRow> summary;
  double slope = 0.0;  // least-squares slope of log median_risk on log n
};

// Groups rows by n, takes medians and fits the log-log slope. Pure.
RateTable summarize_rate_table(std::vector<RateRow> rows);

// Runs the pipeline for every (n, seed) with scenario.n = 2n and reports the L2(mu) risk.
RateTable rate_study(const PipelineConfig& config_template, std::span<const std::size_t> n_grid,
                     std::span<const std::uint64_t> seeds, int threads = 1);

void write_rate_rows_csv(std::ostream& out, const RateTable& table);
void write_rate_summary_csv(std::ostream& out, const RateTable& table);

}  // namespace aalen
