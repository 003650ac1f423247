#include "aalen/single_index.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>

#include <nlohmann/json.hpp>

#include "aalen/error.hpp"
#include "aalen/io.hpp"
#include "aalen/parallel.hpp"
#include "aalen/rng.hpp"

namespace aalen {
namespace {

void normalize_to_hemisphere(std::vector<double>& v) {
  double norm = 0.0;
  for (double c : v) norm += c * c;
  norm = std::sqrt(norm);
  for (double& c : v) c /= norm;
  if (v.back() < 0.0) {
    for (double& c : v) c = -c;
  }
  v.back() = std::max(v.back(), 0.0);
}

SphereNet angular_net(double delta) {
  SphereNet net;
  net.d = 2;
  net.delta = delta;
  const auto count = static_cast<std::size_t>(std::ceil(std::numbers::pi / (2.0 * std::asin(delta / 2.0)))) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    const double phi = std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1);
    net.points.push_back({std::cos(phi), std::max(std::sin(phi), 0.0)});
  }
  return net;
}

SphereNet fibonacci_net(std::size_t count) {
  SphereNet net;
  net.d = 3;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < count; ++k) {
    const double z = (static_cast<double>(k) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    std::vector<double> v{r * std::cos(phi), r * std::sin(phi), z};
    normalize_to_hemisphere(v);
    net.points.push_back(std::move(v));
  }
  return net;
}

// Kronecker sequence in [0,1)^{2q}, paired through Box-Muller into Gaussian
// coordinates and normalized onto the hemisphere.
SphereNet kronecker_net(std::size_t d, std::size_t count) {
  SphereNet net;
  net.d = d;
  const std::size_t dims = 2 * ((d + 1) / 2);
  // Generalized golden ratio: root of x^{dims+1} = x + 1.
  double phi = 2.0;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dims + 1));
  std::vector<double> alpha(dims);
  for (std::size_t i = 0; i < dims; ++i) alpha[i] = std::fmod(std::pow(1.0 / phi, static_cast<double>(i + 1)), 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> g(dims);
    for (std::size_t i = 0; i < dims; i += 2) {
      const double u1 = std::fmod(0.5 + alpha[i] * static_cast<double>(k + 1), 1.0);
      const double u2 = std::fmod(0.5 + alpha[i + 1] * static_cast<double>(k + 1), 1.0);
      const double radius = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
      g[i] = radius * std::cos(2.0 * std::numbers::pi * u2);
      g[i + 1] = radius * std::sin(2.0 * std::numbers::pi * u2);
    }
    g.resize(d);
    normalize_to_hemisphere(g);
    net.points.push_back(std::move(g));
  }
  return net;
}

// Hemisphere area over the area of a geodesic cap of chord radius delta (flat approximation).
double net_size_estimate(std::size_t d, double delta) {
  const double k = static_cast<double>(d - 1);
  const double hemisphere = std::pow(std::numbers::pi, 0.5 * static_cast<double>(d)) / std::tgamma(0.5 * d);
  const double ball = std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
  return hemisphere / (ball * std::pow(delta, k));
}

}  // namespace

double default_net_delta(std::size_t n) {
  require(n >= 2, ErrorCode::kInvalidArgument, "default net delta needs n >= 2");
  const double nn = static_cast<double>(n);
  return 1.0 / std::sqrt(nn * std::log(nn));
}

double probe_covering_radius(const SphereNet& net, int probes, std::uint64_t seed) {
  require(!net.points.empty(), ErrorCode::kInvalidArgument, "empty net");
  double worst = 0.0;
  std::vector<double> p(net.d);
  for (int k = 0; k < probes; ++k) {
    Rng rng(seed, static_cast<std::uint64_t>(k));
    for (double& c : p) c = rng.normal();
    normalize_to_hemisphere(p);
    double best = -2.0;
    for (const auto& v : net.points) {
      double s = 0.0;
      for (std::size_t i = 0; i < net.d; ++i) s += v[i] * p[i];
      best = std::max(best, s);
    }
    worst = std::max(worst, std::sqrt(std::max(0.0, 2.0 - 2.0 * best)));
  }
  return worst;
}

SphereNet build_net(std::size_t d, double delta, std::size_t cap) {
  require(d >= 2, ErrorCode::kInvalidArgument, "nets need d >= 2");
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::kInvalidArgument, "delta must be > 0");
  require(cap >= 1, ErrorCode::kInvalidArgument, "net cap must be >= 1");
  if (delta >= std::numbers::sqrt2) {
    SphereNet net;
    net.d = d;
    net.delta = delta;
    std::vector<double> pole(d, 0.0);
    pole.back() = 1.0;
    net.points.push_back(std::move(pole));
    return net;
  }
  if (d == 2) {
    const auto required = static_cast<std::size_t>(std::ceil(std::numbers::pi / (2.0 * std::asin(delta / 2.0)))) + 1;
    require(required <= cap, ErrorCode::kCapExceeded,
            "net needs " + std::to_string(required) + " points, cap is " + std::to_string(cap));
    return angular_net(delta);
  }
  auto count = static_cast<std::size_t>(std::ceil(net_size_estimate(d, delta)));
  while (true) {
    require(count <= cap, ErrorCode::kCapExceeded,
            "net needs at least " + std::to_string(count) + " points, cap is " + std::to_string(cap));
    SphereNet net = d == 3 ? fibonacci_net(count) : kronecker_net(d, count);
    net.delta = delta;
    if (probe_covering_radius(net) <= delta) return net;
    count = std::max(count + 1, static_cast<std::size_t>(std::ceil(1.1 * static_cast<double>(count))));
  }
}

Dataset project_dataset(const Dataset& data, std::span<const double> v) {
  require(v.size() == data.d(), ErrorCode::kDimensionMismatch,
          "index has " + std::to_string(v.size()) + " entries, data has d = " + std::to_string(data.d()));
  double norm = 0.0;
  for (double c : v) norm += c * c;
  require(std::abs(std::sqrt(norm) - 1.0) <= 1e-12, ErrorCode::kInvalidArgument, "index must be a unit vector");
  std::vector<PathRecord> records;
  records.reserve(data.size());
  for (const auto& r : data.records()) {
    PathRecord p;
    p.id = r.id;
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * r.x[i];
    p.x = {std::clamp(index_to_unit(s, v.size()), 0.0, 1.0)};
    p.events = r.events;
    p.at_risk = r.at_risk;
    records.push_back(std::move(p));
  }
  return Dataset(1, std::move(records));
}

Dictionary build_sim_dictionary(const Dataset& training, const SphereNet& net, const ModelCollection& collection,
                                double ridge, double rho, int threads, const TimeMomentCache* cache,
                                std::vector<std::string>* warnings) {
  require(net.d == training.d(), ErrorCode::kDimensionMismatch, "net dimension differs from data d");
  for (const auto& s : collection.specs) {
    require(s.d == 1, ErrorCode::kInvalidArgument, "single-index collections must have d = 1");
  }
  std::unique_ptr<TimeMomentCache> own;
  if (cache == nullptr) {
    own = std::make_unique<TimeMomentCache>(training);
    cache = own.get();
  }
  const std::size_t specs = collection.specs.size();
  std::vector<std::optional<DictionaryEntry>> slots(net.points.size() * specs);
  std::vector<std::string> errors(slots.size());
  // Parallel over directions; each worker projects once and fits every spec.
  parallel_for(net.points.size(), threads, [&](std::size_t k) {
    const std::vector<double>& v = net.points[k];
    const Dataset projected = project_dataset(training, v);
    for (std::size_t j = 0; j < specs; ++j) {
      const SieveSpec& spec = collection.specs[j];
      try {
        const ErmFit f = fit(projected, spec, ridge, rho, kDefaultQuadNodes, cache);
        nlohmann::json prov = to_json(spec);
        prov["kind"] = "single_index";
        prov["v"] = v;
        slots[k * specs + j] = DictionaryEntry{IntensityModel::single_index(f.model(), v), std::move(prov)};
      } catch (const Error& e) {
        errors[k * specs + j] = e.what();
      }
    }
  });
  Dictionary out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (warnings != nullptr) {
      warnings->push_back("skipped single-index fit " + std::to_string(i) + ": " + errors[i]);
    }
  }
  return out;
}

}  // namespace aalen
