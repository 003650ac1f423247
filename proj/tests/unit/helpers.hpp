#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aalen/model.hpp"
#include "aalen/rng.hpp"
#include "aalen/sieves.hpp"

namespace testing {

inline aalen::PathRecord make_record(std::int64_t id, std::vector<double> x, std::vector<double> events,
                                     std::vector<aalen::StepPiece> pieces) {
  aalen::PathRecord r;
  r.id = id;
  r.x = std::move(x);
  r.events = std::move(events);
  r.at_risk = aalen::StepFunction(std::move(pieces));
  return r;
}

inline aalen::StepPiece piece(double a, double b, double v = 1.0) { return aalen::StepPiece{aalen::Interval{a, b}, v}; }

// Random records with one or two at-risk pieces and events inside them.
inline aalen::Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::vector<aalen::PathRecord> records;
  aalen::Rng rng(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform();
    const double a = 0.5 * rng.uniform();
    const double b = a + (1.0 - a) * rng.uniform();
    std::vector<aalen::StepPiece> pieces{piece(0.0, a, 1.0)};
    std::vector<double> events;
    if (rng.uniform() < 0.5) events.push_back(a * (0.1 + 0.8 * rng.uniform()));
    if (rng.uniform() < 0.5) {
      pieces.push_back(piece(b, 1.0, rng.uniform() < 0.5 ? 1.0 : 0.5));
      if (rng.uniform() < 0.7) events.push_back(b + (1.0 - b) * rng.uniform());
    }
    records.push_back(make_record(static_cast<std::int64_t>(i), x, events, pieces));
  }
  return aalen::Dataset(d, std::move(records));
}

inline Eigen::VectorXd random_coefficients(std::size_t size, std::uint64_t seed, double scale = 1.0) {
  aalen::Rng rng(seed, 1);
  Eigen::VectorXd v(static_cast<Eigen::Index>(size));
  for (auto& c : v) c = scale * rng.normal();
  return v;
}

inline aalen::SieveSpec pp_spec(std::vector<int> m, std::vector<int> l, double clip = 1.0) {
  aalen::SieveSpec s;
  s.family = aalen::SieveFamily::kPiecewisePoly;
  s.d = m.size() - 1;
  s.m = std::move(m);
  s.l = std::move(l);
  s.clip = clip;
  return s;
}

inline aalen::SieveSpec haar_spec(std::vector<int> m, double clip = 1.0) {
  aalen::SieveSpec s;
  s.family = aalen::SieveFamily::kHaar;
  s.d = m.size() - 1;
  s.l.assign(m.size(), 1);
  s.m = std::move(m);
  s.clip = clip;
  return s;
}

// Tensor Gauss-Legendre over the uniform grid with 2^level cells per axis,
// `nodes` points per axis and cell. Calls f(point, weight).
template <class F>
void grid_quadrature(std::size_t axes, int level, int nodes, F&& f) {
  // Gauss-Legendre nodes by Newton iteration, independent of the library rule.
  std::vector<double> xs(static_cast<std::size_t>(nodes));
  std::vector<double> ws(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (nodes + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= nodes; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (nodes == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = nodes * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    xs[static_cast<std::size_t>(i)] = 0.5 * (1.0 - z);
    ws[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  const std::size_t cells = std::size_t{1} << level;
  const double h = 1.0 / static_cast<double>(cells);
  std::size_t total = 1;
  for (std::size_t a = 0; a < axes; ++a) total *= cells * static_cast<std::size_t>(nodes);
  std::vector<double> point(axes);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double w = 1.0;
    for (std::size_t a = 0; a < axes; ++a) {
      const std::size_t k = rem % static_cast<std::size_t>(nodes);
      rem /= static_cast<std::size_t>(nodes);
      const std::size_t c = rem % cells;
      rem /= cells;
      point[a] = (static_cast<double>(c) + xs[k]) * h;
      w *= ws[k] * h;
    }
    f(point, w);
  }
}

}  // namespace testing
