#include "aalen/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "aalen/error.hpp"
#include "aalen/parallel.hpp"
#include "aalen/rng.hpp"

namespace aalen {
namespace {

using nlohmann::json;

double dot(const std::vector<double>& v, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * x[i];
  return s;
}

std::vector<double> read_vector(const json& j, const char* key, std::size_t d) {
  require(j.contains(key), ErrorCode::kParse, std::string("truth descriptor needs \"") + key + "\"");
  const json& v = j.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.assign(d, v.get<double>());
  } else {
    require(v.is_array(), ErrorCode::kParse, std::string("\"") + key + "\" must be a number or an array");
    out = v.get<std::vector<double>>();
  }
  require(out.size() == d, ErrorCode::kDimensionMismatch,
          std::string("\"") + key + "\" must have d = " + std::to_string(d) + " entries");
  for (double c : out) require(std::isfinite(c), ErrorCode::kInvalidArgument, "non-finite descriptor entry");
  return out;
}

double positive_part_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += std::max(c, 0.0);
  return s;
}

double negative_part_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += std::min(c, 0.0);
  return s;
}

std::vector<double> unit_index(const json& j, std::size_t d) {
  std::vector<double> v = read_vector(j, "index", d);
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  require(std::abs(norm - 1.0) <= 1e-12, ErrorCode::kInvalidArgument, "\"index\" must be a unit vector");
  return v;
}

// Smallest t in [0, 1] with cumulative(t) >= target, by bisection to 1e-12.
double invert_cumulative(const CovariateFunction& cumulative, std::span<const double> x, double target) {
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (cumulative(mid, x) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

const ClosedFormIntensity& closed(const IntensityModel& m) {
  return std::get<ClosedFormIntensity>(m.node().value);
}

// Time in (0, 1] at which the hazard first accumulates an Exp(1) draw, or +inf.
double draw_hazard_time(const IntensityModel& model, std::span<const double> x, Rng& rng) {
  const double target = rng.exponential();
  const ClosedFormIntensity& f = closed(model);
  if (f.cumulative(1.0, x) < target) return std::numeric_limits<double>::infinity();
  const double t = invert_cumulative(f.cumulative, x, target);
  if (!(f.value(t, x) > 0.0)) {
    fail(ErrorCode::kNonPositiveIntensity,
         "hazard inversion reached t = " + std::to_string(t) + " where the intensity is not positive");
  }
  return t;
}

// Next accepted point after `t` of a Poisson process thinned to model(., x), or +inf past 1.
double next_thinned_event(const IntensityModel& model, double bound, std::span<const double> x, double t, Rng& rng) {
  if (!(bound > 0.0)) return std::numeric_limits<double>::infinity();
  while (true) {
    t += rng.exponential() / bound;
    if (t > 1.0) return std::numeric_limits<double>::infinity();
    const double a = model(t, x);
    if (a > bound * (1.0 + 1e-12)) {
      fail(ErrorCode::kBoundViolated, "intensity " + std::to_string(a) + " at t = " + std::to_string(t) +
                                          " exceeds the declared bound " + std::to_string(bound));
    }
    if (rng.uniform() * bound < a) return t;
  }
}

std::vector<double> draw_covariates(const ScenarioConfig& config, Rng& rng) {
  std::vector<double> x(config.d);
  for (double& v : x) v = rng.uniform();
  return x;
}

template <class Gen>
Dataset generate(const ScenarioConfig& config, int threads, Gen&& gen) {
  require(config.covariate_law == "uniform", ErrorCode::kInvalidArgument,
          "unsupported covariate law \"" + config.covariate_law + "\"");
  std::vector<PathRecord> records(config.n);
  parallel_for(config.n, threads, [&](std::size_t i) {
    Rng rng(config.seed, i);
    PathRecord r;
    r.id = i;
    r.x = draw_covariates(config, rng);
    gen(r, rng);
    records[i] = std::move(r);
  });
  return Dataset(config.d, std::move(records));
}

IntensityModel optional_intensity(const json& descriptor, std::size_t d) {
  if (descriptor.is_null()) return IntensityModel::constant(d, 0.0);
  return named_intensity(descriptor, d);
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kCensoredSurvival:
      return "censored_survival";
    case ScenarioKind::kCoxProcess:
      return "cox_process";
    case ScenarioKind::kMarkovTransition:
      return "markov_transition";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "censored_survival") return ScenarioKind::kCensoredSurvival;
  if (name == "cox_process") return ScenarioKind::kCoxProcess;
  if (name == "markov_transition") return ScenarioKind::kMarkovTransition;
  fail(ErrorCode::kParse, "unknown scenario kind \"" + name + "\"");
}

IntensityModel named_intensity(const json& descriptor, std::size_t d) {
  require(descriptor.is_object() && descriptor.contains("family"), ErrorCode::kParse,
          "intensity descriptor must be an object with a \"family\"");
  require(d >= 1, ErrorCode::kInvalidArgument, "d must be >= 1");
  const auto family = descriptor.at("family").get<std::string>();
  const double scale = descriptor.value("scale", 1.0);
  require(std::isfinite(scale) && scale >= 0.0, ErrorCode::kInvalidArgument, "\"scale\" must be >= 0");
  ClosedFormIntensity f;
  f.d = d;
  f.descriptor = descriptor;
  f.description = family;

  if (family == "constant") {
    const double c = descriptor.at("value").get<double>();
    require(c >= 0.0 && std::isfinite(c), ErrorCode::kInvalidArgument, "constant intensity must be >= 0");
    f.value = [c](double, std::span<const double>) { return c; };
    f.cumulative = [c](double t, std::span<const double>) { return c * t; };
    f.sup = c;
  } else if (family == "linear") {
    const double a = descriptor.at("intercept").get<double>();
    const std::vector<double> b = read_vector(descriptor, "slope", d);
    require(a + negative_part_sum(b) >= 0.0, ErrorCode::kInvalidArgument, "linear intensity is negative somewhere");
    f.value = [a, b](double, std::span<const double> x) { return a + dot(b, x); };
    f.cumulative = [a, b](double t, std::span<const double> x) { return (a + dot(b, x)) * t; };
    f.sup = a + positive_part_sum(b);
  } else if (family == "smooth_separable") {
    const double norm = scale / (1.0 + static_cast<double>(d));
    auto covariate = [norm](std::span<const double> x) {
      return norm * (1.0 + std::accumulate(x.begin(), x.end(), 0.0));
    };
    f.value = [covariate](double t, std::span<const double> x) { return std::exp(-t) * covariate(x); };
    f.cumulative = [covariate](double t, std::span<const double> x) { return -std::expm1(-t) * covariate(x); };
    f.sup = scale;
  } else if (family == "single_index") {
    const std::vector<double> v = unit_index(descriptor, d);
    f.value = [v, scale](double t, std::span<const double> x) {
      return scale * (1.0 + std::sin(std::numbers::pi * dot(v, x))) * std::exp(-t);
    };
    f.cumulative = [v, scale](double t, std::span<const double> x) {
      return scale * (1.0 + std::sin(std::numbers::pi * dot(v, x))) * -std::expm1(-t);
    };
    f.sup = 2.0 * scale;
  } else if (family == "cox") {
    const std::vector<double> v = unit_index(descriptor, d);
    f.value = [v, scale](double t, std::span<const double> x) { return scale * std::exp(dot(v, x) - t); };
    f.cumulative = [v, scale](double t, std::span<const double> x) {
      return scale * std::exp(dot(v, x)) * -std::expm1(-t);
    };
    f.sup = scale * std::exp(positive_part_sum(v));
  } else if (family == "aalen") {
    const std::vector<double> v = unit_index(descriptor, d);
    require(scale * std::exp(-1.0) + negative_part_sum(v) >= 0.0, ErrorCode::kInvalidArgument,
            "Aalen-form intensity is negative somewhere");
    f.value = [v, scale](double t, std::span<const double> x) { return scale * std::exp(-t) + dot(v, x); };
    f.cumulative = [v, scale](double t, std::span<const double> x) {
      return scale * -std::expm1(-t) + dot(v, x) * t;
    };
    f.sup = scale + positive_part_sum(v);
  } else {
    fail(ErrorCode::kParse, "unknown intensity family \"" + family + "\"");
  }
  if (descriptor.contains("bound")) {
    const double bound = descriptor.at("bound").get<double>();
    require(std::isfinite(bound) && bound >= 0.0, ErrorCode::kInvalidArgument, "\"bound\" must be >= 0");
    f.sup = bound;
  }
  return IntensityModel::closed_form(std::move(f));
}

std::vector<double> declared_index(const json& descriptor) {
  if (!descriptor.is_object() || !descriptor.contains("index")) return {};
  const auto family = descriptor.value("family", std::string());
  if (family != "single_index" && family != "cox" && family != "aalen") return {};
  return descriptor.at("index").get<std::vector<double>>();
}

ScenarioConfig scenario_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kParse, "scenario must be a JSON object");
  ScenarioConfig c;
  c.kind = scenario_kind_from_string(j.value("kind", std::string("censored_survival")));
  c.d = j.value("d", std::size_t{1});
  c.n = j.value("n", std::size_t{0});
  c.seed = j.value("seed", std::uint64_t{0});
  require(j.contains("truth"), ErrorCode::kParse, "scenario needs a \"truth\" descriptor");
  c.truth = j.at("truth");
  c.censoring = j.value("censoring", json());
  c.return_intensity = j.value("return_intensity", json());
  if (j.contains("covariates")) c.covariate_law = j.at("covariates").value("law", std::string("uniform"));
  require(c.d >= 1 && c.d <= kMaxCovariates, ErrorCode::kInvalidArgument, "scenario d must be in [1, 7]");
  // Validate descriptors eagerly.
  named_intensity(c.truth, c.d);
  optional_intensity(c.censoring, c.d);
  optional_intensity(c.return_intensity, c.d);
  return c;
}

json to_json(const ScenarioConfig& c) {
  json j = {{"kind", to_string(c.kind)},
            {"d", c.d},
            {"n", c.n},
            {"seed", c.seed},
            {"truth", c.truth},
            {"covariates", {{"law", c.covariate_law}}}};
  if (!c.censoring.is_null()) j["censoring"] = c.censoring;
  if (!c.return_intensity.is_null()) j["return_intensity"] = c.return_intensity;
  j["truth_sup"] = scenario_truth(c).sup_bound();
  return j;
}

IntensityModel scenario_truth(const ScenarioConfig& config) { return named_intensity(config.truth, config.d); }

Dataset simulate_censored_survival(const ScenarioConfig& config, int threads) {
  require(config.kind == ScenarioKind::kCensoredSurvival, ErrorCode::kInvalidArgument, "not a censored-survival scenario");
  const IntensityModel truth = scenario_truth(config);
  const IntensityModel censoring = optional_intensity(config.censoring, config.d);
  return generate(config, threads, [&](PathRecord& r, Rng& rng) {
    const double t = draw_hazard_time(truth, r.x, rng);
    const double c = draw_hazard_time(censoring, r.x, rng);
    const double stop = std::min({t, c, 1.0});
    if (t <= c && t <= 1.0) r.events.push_back(t);
    r.at_risk = StepFunction({StepPiece{Interval{0.0, stop}, 1.0}});
  });
}

Dataset simulate_cox_process(const ScenarioConfig& config, int threads) {
  require(config.kind == ScenarioKind::kCoxProcess, ErrorCode::kInvalidArgument, "not a Cox-process scenario");
  const IntensityModel truth = scenario_truth(config);
  const double bound = truth.sup_bound();
  return generate(config, threads, [&](PathRecord& r, Rng& rng) {
    double t = 0.0;
    while (true) {
      t = next_thinned_event(truth, bound, r.x, t, rng);
      if (!std::isfinite(t)) break;
      r.events.push_back(t);
    }
    r.at_risk = StepFunction({StepPiece{Interval{0.0, 1.0}, 1.0}});
  });
}

Dataset simulate_markov_transition(const ScenarioConfig& config, int threads) {
  require(config.kind == ScenarioKind::kMarkovTransition, ErrorCode::kInvalidArgument, "not a Markov scenario");
  const IntensityModel forward = scenario_truth(config);
  const IntensityModel back = optional_intensity(config.return_intensity, config.d);
  const double forward_bound = forward.sup_bound();
  const double back_bound = back.sup_bound();
  return generate(config, threads, [&](PathRecord& r, Rng& rng) {
    std::vector<StepPiece> pieces;
    double t = 0.0;
    while (t < 1.0) {
      // State 1 from t until the next 1 -> 2 transition.
      const double jump = next_thinned_event(forward, forward_bound, r.x, t, rng);
      if (!std::isfinite(jump)) {
        pieces.push_back(StepPiece{Interval{t, 1.0}, 1.0});
        break;
      }
      pieces.push_back(StepPiece{Interval{t, jump}, 1.0});
      r.events.push_back(jump);
      const double back_jump = next_thinned_event(back, back_bound, r.x, jump, rng);
      if (!std::isfinite(back_jump)) break;
      t = back_jump;
    }
    r.at_risk = StepFunction(std::move(pieces));
  });
}

Dataset simulate(const ScenarioConfig& config, int threads) {
  switch (config.kind) {
    case ScenarioKind::kCensoredSurvival:
      return simulate_censored_survival(config, threads);
    case ScenarioKind::kCoxProcess:
      return simulate_cox_process(config, threads);
    case ScenarioKind::kMarkovTransition:
      return simulate_markov_transition(config, threads);
  }
  fail(ErrorCode::kInvalidArgument, "unknown scenario kind");
}

std::optional<MuMeasure> closed_form_mu(const ScenarioConfig& config) {
  ClosedFormMu mu;
  mu.d = config.d;
  mu.density = [](std::span<const double>) { return 1.0; };
  const IntensityModel truth = scenario_truth(config);
  switch (config.kind) {
    case ScenarioKind::kCensoredSurvival: {
      const IntensityModel censoring = optional_intensity(config.censoring, config.d);
      mu.survivor = [truth, censoring](double t, std::span<const double> x) {
        return std::exp(-closed(truth).cumulative(t, x) - closed(censoring).cumulative(t, x));
      };
      break;
    }
    case ScenarioKind::kCoxProcess:
      mu.survivor = [](double, std::span<const double>) { return 1.0; };
      break;
    case ScenarioKind::kMarkovTransition: {
      const IntensityModel back = optional_intensity(config.return_intensity, config.d);
      if (back.sup_bound() > 0.0) return std::nullopt;
      mu.survivor = [truth](double t, std::span<const double> x) { return std::exp(-closed(truth).cumulative(t, x)); };
      break;
    }
  }
  return MuMeasure::closed_form(std::move(mu));
}

MuMeasure evaluation_mu(const ScenarioConfig& config, std::size_t fallback_size, std::uint64_t seed, int threads) {
  if (auto mu = closed_form_mu(config)) return *mu;
  ScenarioConfig fresh = config;
  fresh.n = fallback_size;
  fresh.seed = seed;
  return MuMeasure::empirical(simulate(fresh, threads));
}

DeviationSetup deviation_setup(const ScenarioConfig& config) {
  DeviationSetup s;
  s.truth = scenario_truth(config);
  s.truth_sup = s.truth.sup_bound();
  s.n = config.n;
  s.simulate = [config](std::uint64_t seed) {
    ScenarioConfig c = config;
    c.seed = seed;
    return simulate(c);
  };
  return s;
}

}  // namespace aalen
