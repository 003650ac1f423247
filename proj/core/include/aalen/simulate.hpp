#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aalen/model.hpp"
#include "aalen/risk.hpp"

namespace aalen {

enum class ScenarioKind { kCensoredSurvival, kCoxProcess, kMarkovTransition };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

// Named closed-form intensity families. Every descriptor is an object with a
// "family" key and an optional "scale" (default 1):
//   constant        {"value": c}                      alpha = c
//   linear          {"intercept": a, "slope": [..]}   alpha = a + slope'x
//   smooth_separable                                  alpha = scale e^{-t} (1 + sum x) / (1 + d)
//   single_index    {"index": v}                      alpha = scale (1 + sin(pi v'x)) e^{-t}
//   cox             {"index": v}                      alpha = scale e^{-t} exp(v'x)
//   aalen           {"index": v}                      alpha = scale e^{-t} + v'x
// Each declares its sup norm and closed-form cumulative hazard. An optional
// "bound" replaces the declared sup norm used by thinning.
IntensityModel named_intensity(const nlohmann::json& descriptor, std::size_t d);

// Declared index of a single-index, Cox or Aalen family; empty otherwise.
std::vector<double> declared_index(const nlohmann::json& descriptor);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kCensoredSurvival;
  std::size_t d = 1;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  nlohmann::json truth;
  nlohmann::json censoring;         // censoring hazard, CensoredSurvival only; null means none
  nlohmann::json return_intensity;  // 2 -> 1 intensity, MarkovTransition only; null means 0
  std::string covariate_law = "uniform";
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& config);

IntensityModel scenario_truth(const ScenarioConfig& config);

Dataset simulate_censored_survival(const ScenarioConfig& config, int threads = 1);
Dataset simulate_cox_process(const ScenarioConfig& config, int threads = 1);
Dataset simulate_markov_transition(const ScenarioConfig& config, int threads = 1);
// Dispatches on config.kind. Record i uses its own counter-based stream, so the
// output does not depend on `threads`.
Dataset simulate(const ScenarioConfig& config, int threads = 1);

// mu with E[Y(t) | X = x] in closed form when the scenario provides it.
std::optional<MuMeasure> closed_form_mu(const ScenarioConfig& config);

// Closed-form mu when available, else the empirical mu of a fresh simulation of
// `fallback_size` records drawn with `seed`.
MuMeasure evaluation_mu(const ScenarioConfig& config, std::size_t fallback_size, std::uint64_t seed, int threads = 1);

DeviationSetup deviation_setup(const ScenarioConfig& config);

}  // namespace aalen
