#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aalen/aggregation.hpp"
#include "aalen/erm.hpp"
#include "aalen/model.hpp"
#include "aalen/sieves.hpp"

namespace aalen {

inline constexpr std::size_t kDefaultNetCap = 20000;
inline constexpr int kNetProbes = 100000;
inline constexpr std::uint64_t kNetProbeSeed = 0x6e657470726f6265ULL;

// Points on the half-unit sphere {v in R^d : |v| = 1, v_d >= 0}.
struct SphereNet {
  std::size_t d = 2;
  double delta = 1.0;
  std::vector<std::vector<double>> points;
};

// d = 2: angular grid on [0, pi]. d = 3: Fibonacci points on the hemisphere.
// d >= 4: Kronecker points pushed to the sphere. For d >= 3 the size grows
// until the probe check passes. delta >= sqrt(2) gives the single point e_d.
// Throws kCapExceeded with the required size when it exceeds cap.
SphereNet build_net(std::size_t d, double delta, std::size_t cap = kDefaultNetCap);

// Max over seeded random hemisphere directions of the distance to the nearest net point.
double probe_covering_radius(const SphereNet& net, int probes = kNetProbes, std::uint64_t seed = kNetProbeSeed);

// (n log n)^{-1/2}.
double default_net_delta(std::size_t n);

// Records with covariate index_to_unit(v'X); events and at-risk processes unchanged.
Dataset project_dataset(const Dataset& data, std::span<const double> v);

// Fits every (m, v) of collection x net on the projected training data and wraps
// each as a d-dimensional single-index model. Failed fits are skipped and
// reported through `warnings`. `cache` must be built from `training`.
Dictionary build_sim_dictionary(const Dataset& training, const SphereNet& net, const ModelCollection& collection,
                                double ridge, double rho, int threads = 1, const TimeMomentCache* cache = nullptr,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace aalen
