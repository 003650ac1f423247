#include "aalen/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "aalen/error.hpp"
#include "aalen/parallel.hpp"
#include "aalen/risk.hpp"

namespace aalen {

std::vector<double> gibbs_weights(std::span<const double> risks, std::size_t n, double temperature) {
  require(!risks.empty(), ErrorCode::kInvalidArgument, "gibbs_weights needs at least one risk");
  require(n >= 1, ErrorCode::kInvalidArgument, "gibbs_weights needs n >= 1");
  require(temperature > 0.0 && std::isfinite(temperature), ErrorCode::kInvalidArgument, "temperature must be > 0");
  for (double r : risks) require(std::isfinite(r), ErrorCode::kInvalidArgument, "risks must be finite");
  const double best = *std::min_element(risks.begin(), risks.end());
  const double scale = static_cast<double>(n) / temperature;
  std::vector<double> w(risks.size());
  double total = 0.0;
  for (std::size_t j = 0; j < risks.size(); ++j) {
    w[j] = std::exp(-scale * (risks[j] - best));
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

double penalized_linearized_risk(std::span<const double> risks, std::span<const double> weights, std::size_t n,
                                 double temperature) {
  require(risks.size() == weights.size(), ErrorCode::kDimensionMismatch, "one weight per risk");
  double linear = 0.0;
  double entropy = 0.0;
  for (std::size_t j = 0; j < risks.size(); ++j) {
    linear += weights[j] * risks[j];
    if (weights[j] > 0.0) entropy += weights[j] * std::log(weights[j]);
  }
  return linear + temperature / static_cast<double>(n) * entropy;
}

AggregateFit aggregate_from_risks(Dictionary dictionary, std::vector<double> learning_risks, std::size_t n,
                                  double temperature) {
  require(!dictionary.empty(), ErrorCode::kInvalidArgument, "cannot aggregate an empty dictionary");
  require(learning_risks.size() == dictionary.size(), ErrorCode::kDimensionMismatch, "one risk per member");
  AggregateFit out;
  out.weights = gibbs_weights(learning_risks, n, temperature);
  out.temperature = temperature;
  out.n = n;
  out.learning_risks = std::move(learning_risks);
  std::vector<IntensityModel> members;
  members.reserve(dictionary.size());
  for (const auto& e : dictionary) members.push_back(e.model);
  out.model = members.size() == 1 ? members.front() : IntensityModel::mixture(out.weights, std::move(members));
  out.dictionary = std::move(dictionary);
  return out;
}

AggregateFit aggregate(Dictionary dictionary, const Dataset& learning, double temperature, int threads, int nodes) {
  require(!dictionary.empty(), ErrorCode::kInvalidArgument, "cannot aggregate an empty dictionary");
  require(!learning.empty(), ErrorCode::kEmptyDataset, "learning sample is empty");
  std::vector<double> risks(dictionary.size());
  const QuadratureCache cache(learning);
  parallel_for(dictionary.size(), threads,
               [&](std::size_t j) { risks[j] = empirical_risk(learning, dictionary[j].model, cache, nodes); });
  return aggregate_from_risks(std::move(dictionary), std::move(risks), learning.size(), temperature);
}

GibbsOptimality verify_gibbs_optimality(std::span<const double> risks, std::size_t n, double temperature,
                                        double grid_step) {
  require(!risks.empty(), ErrorCode::kInvalidArgument, "need at least one risk");
  require(risks.size() <= 4, ErrorCode::kCapExceeded,
          "simplex grid search supports at most 4 models, got " + std::to_string(risks.size()));
  require(grid_step > 0.0 && grid_step <= 0.01, ErrorCode::kInvalidArgument, "grid_step must be in (0, 0.01]");
  GibbsOptimality out;
  const std::vector<double> w = gibbs_weights(risks, n, temperature);
  out.closed_form_objective = penalized_linearized_risk(risks, w, n, temperature);

  const auto steps = static_cast<int>(std::lround(1.0 / grid_step));
  const std::size_t m = risks.size();
  std::vector<int> counts(m, 0);
  std::vector<double> theta(m);
  out.grid_min_objective = std::numeric_limits<double>::infinity();
  // Enumerate compositions of `steps` into m nonnegative parts.
  std::function<void(std::size_t, int)> visit = [&](std::size_t axis, int left) {
    if (axis + 1 == m) {
      counts[axis] = left;
      for (std::size_t j = 0; j < m; ++j) theta[j] = static_cast<double>(counts[j]) / steps;
      const double value = penalized_linearized_risk(risks, theta, n, temperature);
      if (value < out.grid_min_objective) {
        out.grid_min_objective = value;
        out.grid_argmin = theta;
      }
      return;
    }
    for (int k = 0; k <= left; ++k) {
      counts[axis] = k;
      visit(axis + 1, left - k);
    }
  };
  visit(0, steps);
  return out;
}

IntensityModel jackknife(std::span<const AggregateFit> splits) {
  require(!splits.empty(), ErrorCode::kInvalidArgument, "jackknife needs at least one split");
  if (splits.size() == 1) return splits.front().model;
  std::vector<IntensityModel> models;
  for (const auto& s : splits) models.push_back(s.model);
  std::vector<double> w(splits.size(), 1.0 / static_cast<double>(splits.size()));
  return IntensityModel::mixture(std::move(w), std::move(models));
}

}  // namespace aalen
