#include "aalen/quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "aalen/error.hpp"

namespace aalen {
namespace {

// Newton iteration on P_n from Chebyshev initial guesses, then mapped to [0, 1].
GaussLegendre make_rule(int n) {
  GaussLegendre rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.5;
  return rule;
}

}  // namespace

const GaussLegendre& gauss_legendre(int n) {
  if (n < 1 || n > kMaxQuadratureNodes) {
    fail(ErrorCode::kInvalidArgument, "quadrature node count must lie in [1, 64], got " + std::to_string(n));
  }
  static const std::array<GaussLegendre, kMaxQuadratureNodes + 1> rules = [] {
    std::array<GaussLegendre, kMaxQuadratureNodes + 1> all;
    for (int k = 1; k <= kMaxQuadratureNodes; ++k) all[k] = make_rule(k);
    return all;
  }();
  return rules[n];
}

}  // namespace aalen
