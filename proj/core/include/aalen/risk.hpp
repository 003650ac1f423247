#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "aalen/model.hpp"

namespace aalen {

struct RiskReport {
  double empirical_risk = 0.0;
  double empirical_norm_sq = 0.0;
  std::size_t n = 0;
};

// int alpha(t, X)^2 Y(t) dt - 2 sum_{events} alpha(s, X) for one record.
double record_loss(const PathRecord& record, const IntensityModel& model, int nodes = kDefaultQuadNodes);

// P_n(l_alpha) = (1/n) sum_i [int alpha^2 Y^i dt - 2 sum_events alpha(s, X_i)].
double empirical_risk(const Dataset& data, const IntensityModel& model, int nodes = kDefaultQuadNodes);
// Same with node tables taken from a cache built on data's at-risk processes.
double empirical_risk(const Dataset& data, const IntensityModel& model, const QuadratureCache& cache,
                      int nodes = kDefaultQuadNodes);

// ||alpha||_n^2 = (1/n) sum_i int alpha(t, X_i)^2 Y^i(t) dt.
double empirical_norm_sq(const Dataset& data, const IntensityModel& model, int nodes = kDefaultQuadNodes);

RiskReport risk_report(const Dataset& data, const IntensityModel& model, int nodes = kDefaultQuadNodes);

// ||a - b||^2 in L2(mu). Empirical mu integrates exactly over records; closed-form mu
// uses composite Gauss-Legendre in t and, over x, a grid when d == 1 or `mc_draws`
// seeded uniform draws weighted by f_X when d >= 2.
double l2mu_distance_sq(const MuMeasure& mu, const IntensityModel& a, const IntensityModel& b, int quad_nodes,
                        int mc_draws, std::uint64_t seed);

struct ExcessRiskCheck {
  double lhs = 0.0;    // P_n(l_alpha) - P_n(l_alpha0) on held-out data
  double rhs = 0.0;    // ||alpha - alpha0||^2 under mu
  double mc_se = 0.0;  // standard error of lhs
};

ExcessRiskCheck excess_risk_check(const MuMeasure& mu, const IntensityModel& model, const IntensityModel& truth,
                                  const Dataset& eval_data, int quad_nodes = kDefaultQuadNodes, int mc_draws = 4096,
                                  std::uint64_t seed = 0);

// Z_n(alpha) = n^{-1/2} sum_i [sum_events alpha(s, X_i) - int alpha alpha0 Y^i dt].
double martingale_term(const Dataset& data, const IntensityModel& model, const IntensityModel& truth,
                       int nodes = kDefaultQuadNodes);

// <Z_n(alpha)> = (1/n) sum_i int alpha^2 alpha0 Y^i dt.
double predictable_variation(const Dataset& data, const IntensityModel& model, const IntensityModel& truth,
                             int nodes = kDefaultQuadNodes);

// Simulation setup for deviation diagnostics: the truth, its declared sup norm,
// and a generator of fresh datasets of size n from a seed.
struct DeviationSetup {
  IntensityModel truth;
  double truth_sup = 0.0;
  std::size_t n = 0;
  std::function<Dataset(std::uint64_t)> simulate;
};

struct BernsteinRow {
  double z = 0.0;
  double mc_tail = 0.0;
  double mc_se = 0.0;
  double bound = 1.0;
};

// Monte-Carlo estimate of P[Z_n(alpha) > z, <Z_n> <= delta^2] with the envelope
// delta^2 = ||alpha0||_inf ||alpha||_inf^2, next to the Bernstein bound
// exp(-z^2 / (2 (delta^2 + z ||alpha||_inf / (3 sqrt n)))).
std::vector<BernsteinRow> bernstein_tail_check(const DeviationSetup& setup, const IntensityModel& model,
                                               std::span<const double> z_grid, int replicates, std::uint64_t seed,
                                               int threads = 1);

void write_bernstein_csv(std::ostream& out, std::span<const BernsteinRow> rows);

// Jacod log-likelihood ratio log(dP_a / dP_b) of the sample.
double log_likelihood_ratio(const Dataset& data, const IntensityModel& a, const IntensityModel& b,
                            int nodes = kDefaultQuadNodes);

}  // namespace aalen
