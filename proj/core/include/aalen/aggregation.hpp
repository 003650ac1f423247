#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "aalen/model.hpp"

namespace aalen {

// A dictionary member with its provenance tag (family, m, l and, for
// single-index members, the direction v).
struct DictionaryEntry {
  IntensityModel model;
  nlohmann::json provenance;
};

using Dictionary = std::vector<DictionaryEntry>;

struct AggregateFit {
  Dictionary dictionary;
  std::vector<double> weights;
  double temperature = 1.0;
  std::vector<double> learning_risks;
  std::size_t n = 0;  // learning sample size
  IntensityModel model;  // the Gibbs mixture
};

inline double default_temperature(double clip) { return 4.0 * clip * clip; }

// w_j proportional to exp(-n risk_j / T), normalized with max subtraction.
std::vector<double> gibbs_weights(std::span<const double> risks, std::size_t n, double temperature);

// R(theta) + (T/n) sum theta_j log theta_j, with 0 log 0 = 0.
double penalized_linearized_risk(std::span<const double> risks, std::span<const double> weights, std::size_t n,
                                 double temperature);

AggregateFit aggregate(Dictionary dictionary, const Dataset& learning, double temperature, int threads = 1,
                       int nodes = kDefaultQuadNodes);

// Same, from precomputed learning risks.
AggregateFit aggregate_from_risks(Dictionary dictionary, std::vector<double> learning_risks, std::size_t n,
                                  double temperature);

struct GibbsOptimality {
  double closed_form_objective = 0.0;
  double grid_min_objective = 0.0;
  std::vector<double> grid_argmin;
};

// Brute-force check of the Gibbs weights against every point of the simplex
// grid with the given step. At most four risks.
GibbsOptimality verify_gibbs_optimality(std::span<const double> risks, std::size_t n, double temperature,
                                        double grid_step);

// Equal-weight mixture of the split aggregates; a single split is returned as is.
IntensityModel jackknife(std::span<const AggregateFit> splits);

}  // namespace aalen
