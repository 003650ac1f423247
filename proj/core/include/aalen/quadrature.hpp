#pragma once

#include <vector>

namespace aalen {

// Gauss-Legendre rule on [0, 1]; exact for polynomials of degree <= 2n - 1.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kMaxQuadratureNodes = 64;

// Cached rule with `n` nodes, 1 <= n <= kMaxQuadratureNodes.
const GaussLegendre& gauss_legendre(int n);

}  // namespace aalen
