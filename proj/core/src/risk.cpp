#include "aalen/risk.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "aalen/error.hpp"
#include "aalen/parallel.hpp"
#include "aalen/rng.hpp"

namespace aalen {
namespace {

void check_dims(const Dataset& data, const IntensityModel& model) {
  require(!data.empty(), ErrorCode::kEmptyDataset, "dataset has no records");
  require(model.valid() && model.dimension() == data.d(), ErrorCode::kDimensionMismatch,
          "model dimension " + std::to_string(model.valid() ? model.dimension() : 0) + " differs from data d = " +
              std::to_string(data.d()));
}

struct RecordParts {
  double square = 0.0;  // int alpha^2 Y
  double events = 0.0;  // sum alpha(s)
};

// Scratch buffers reused across records.
struct Workspace {
  YQuadrature q;
  std::vector<double> a;
  std::vector<double> b;
};

RecordParts record_parts(const PathRecord& r, const IntensityModel& model, int nodes, Workspace& ws) {
  const auto s = model.slice(r.x);
  y_quadrature(r, model.time_breakpoints(), nodes, ws.q);
  ws.a.resize(ws.q.t.size());
  s->evaluate(ws.q.t, ws.a);
  RecordParts out;
  for (std::size_t i = 0; i < ws.a.size(); ++i) out.square += ws.q.w[i] * ws.a[i] * ws.a[i];
  ws.b.resize(r.events.size());
  s->evaluate(r.events, ws.b);
  for (double v : ws.b) out.events += v;
  return out;
}

std::vector<double> uniform_grid(int cells) {
  std::vector<double> out;
  for (int k = 1; k < cells; ++k) out.push_back(static_cast<double>(k) / cells);
  return out;
}

// Tensor time rule over the given cells, flattened.
YQuadrature time_rule(std::span<const double> cuts, const GaussLegendre& rule) {
  YQuadrature q;
  double lo = 0.0;
  for (std::size_t c = 0; c <= cuts.size(); ++c) {
    const double hi = c < cuts.size() ? cuts[c] : 1.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      q.t.push_back(lo + (hi - lo) * rule.nodes[k]);
      q.w.push_back((hi - lo) * rule.weights[k]);
    }
    lo = hi;
  }
  return q;
}

// int_0^1 (a - b)^2(t, x) s(t | x) dt.
double time_integral(const TimeSlice& a, const TimeSlice& b, const ClosedFormMu& mu, std::span<const double> x,
                     const YQuadrature& q, Workspace& ws) {
  ws.a.resize(q.t.size());
  ws.b.resize(q.t.size());
  a.evaluate(q.t, ws.a);
  b.evaluate(q.t, ws.b);
  double total = 0.0;
  for (std::size_t i = 0; i < q.t.size(); ++i) {
    const double diff = ws.a[i] - ws.b[i];
    total += q.w[i] * diff * diff * mu.survivor(q.t[i], x);
  }
  return total;
}

}  // namespace

double record_loss(const PathRecord& record, const IntensityModel& model, int nodes) {
  Workspace ws;
  const RecordParts p = record_parts(record, model, nodes, ws);
  return p.square - 2.0 * p.events;
}

RiskReport risk_report(const Dataset& data, const IntensityModel& model, int nodes) {
  check_dims(data, model);
  double square = 0.0;
  double events = 0.0;
  Workspace ws;
  for (const auto& r : data.records()) {
    const RecordParts p = record_parts(r, model, nodes, ws);
    square += p.square;
    events += p.events;
  }
  const double n = static_cast<double>(data.size());
  return {square / n - 2.0 * events / n, square / n, data.size()};
}

double empirical_risk(const Dataset& data, const IntensityModel& model, int nodes) {
  return risk_report(data, model, nodes).empirical_risk;
}

double empirical_risk(const Dataset& data, const IntensityModel& model, const QuadratureCache& cache, int nodes) {
  check_dims(data, model);
  require(cache.records() == data.size(), ErrorCode::kInvalidArgument, "quadrature cache built for another dataset");
  const DatasetQuadrature& q = cache.get(model.time_breakpoints(), nodes);
  // Same accumulation order as risk_report, so both agree bit for bit.
  double square = 0.0;
  double events = 0.0;
  std::vector<double> vals;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PathRecord& r = data.records()[i];
    const auto s = model.slice(r.x);
    const auto ts = q.times(i);
    const auto ws = q.weights(i);
    vals.resize(std::max(ts.size(), r.events.size()));
    s->evaluate(ts, std::span<double>(vals.data(), ts.size()));
    double sq = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) sq += ws[k] * vals[k] * vals[k];
    s->evaluate(r.events, std::span<double>(vals.data(), r.events.size()));
    double ev = 0.0;
    for (std::size_t k = 0; k < r.events.size(); ++k) ev += vals[k];
    square += sq;
    events += ev;
  }
  const double n = static_cast<double>(data.size());
  return square / n - 2.0 * events / n;
}

double empirical_norm_sq(const Dataset& data, const IntensityModel& model, int nodes) {
  check_dims(data, model);
  double square = 0.0;
  Workspace ws;
  for (const auto& r : data.records()) square += record_parts(r, model, nodes, ws).square;
  return square / static_cast<double>(data.size());
}

double l2mu_distance_sq(const MuMeasure& mu, const IntensityModel& a, const IntensityModel& b, int quad_nodes,
                        int mc_draws, std::uint64_t seed) {
  require(quad_nodes > 0 && mc_draws > 0, ErrorCode::kInvalidArgument, "quad_nodes and mc_draws must be positive");
  require(a.valid() && b.valid() && a.dimension() == mu.d() && b.dimension() == mu.d(),
          ErrorCode::kDimensionMismatch, "models and measure must share the covariate dimension");
  const auto cuts = merge_breakpoints(a.time_breakpoints(), b.time_breakpoints());
  if (mu.is_empirical()) {
    const Dataset& data = *mu.as_empirical().data;
    double total = 0.0;
    Workspace ws;
    for (const auto& r : data.records()) {
      y_quadrature(r, cuts, quad_nodes, ws.q);
      ws.a.resize(ws.q.t.size());
      ws.b.resize(ws.q.t.size());
      a.slice(r.x)->evaluate(ws.q.t, ws.a);
      b.slice(r.x)->evaluate(ws.q.t, ws.b);
      for (std::size_t i = 0; i < ws.a.size(); ++i) {
        const double diff = ws.a[i] - ws.b[i];
        total += ws.q.w[i] * diff * diff;
      }
    }
    return total / static_cast<double>(data.size());
  }

  const ClosedFormMu& cf = mu.as_closed_form();
  const GaussLegendre& rule = gauss_legendre(quad_nodes);
  const YQuadrature tq = time_rule(merge_breakpoints(cuts, uniform_grid(8)), rule);
  Workspace ws;
  if (cf.d == 1) {
    const auto x_cuts = merge_breakpoints(merge_breakpoints(a.covariate_breakpoints(), b.covariate_breakpoints()),
                                          uniform_grid(8));
    double total = 0.0;
    double lo = 0.0;
    for (std::size_t c = 0; c <= x_cuts.size(); ++c) {
      const double hi = c < x_cuts.size() ? x_cuts[c] : 1.0;
      const double width = hi - lo;
      double cell = 0.0;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double x = lo + width * rule.nodes[k];
        const std::span<const double> xs(&x, 1);
        const auto sa = a.slice(xs);
        const auto sb = b.slice(xs);
        cell += rule.weights[k] * cf.density(xs) * time_integral(*sa, *sb, cf, xs, tq, ws);
      }
      total += width * cell;
      lo = hi;
    }
    return total;
  }
  // Draws go in blocks so large mixtures are traversed once per block, not once per draw.
  constexpr int kBlock = 64;
  const std::size_t nt = tq.t.size();
  double total = 0.0;
  std::vector<double> xs;
  for (int start = 0; start < mc_draws; start += kBlock) {
    const int rows = std::min(kBlock, mc_draws - start);
    xs.resize(static_cast<std::size_t>(rows) * cf.d);
    for (int i = 0; i < rows; ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(start + i));
      for (std::size_t j = 0; j < cf.d; ++j) xs[i * cf.d + j] = rng.uniform();
    }
    ws.a.resize(xs.size() / cf.d * nt);
    ws.b.resize(ws.a.size());
    a.evaluate_grid(xs, tq.t, ws.a);
    b.evaluate_grid(xs, tq.t, ws.b);
    for (int i = 0; i < rows; ++i) {
      const std::span<const double> x(xs.data() + i * cf.d, cf.d);
      double cell = 0.0;
      for (std::size_t k = 0; k < nt; ++k) {
        const double diff = ws.a[i * nt + k] - ws.b[i * nt + k];
        cell += tq.w[k] * diff * diff * cf.survivor(tq.t[k], x);
      }
      total += cf.density(x) * cell;
    }
  }
  return total / mc_draws;
}

ExcessRiskCheck excess_risk_check(const MuMeasure& mu, const IntensityModel& model, const IntensityModel& truth,
                                  const Dataset& eval_data, int quad_nodes, int mc_draws, std::uint64_t seed) {
  check_dims(eval_data, model);
  check_dims(eval_data, truth);
  const double n = static_cast<double>(eval_data.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& r : eval_data.records()) {
    const double diff = record_loss(r, model, quad_nodes) - record_loss(r, truth, quad_nodes);
    sum += diff;
    sum_sq += diff * diff;
  }
  ExcessRiskCheck out;
  out.lhs = sum / n;
  const double var = n > 1 ? (sum_sq - n * out.lhs * out.lhs) / (n - 1.0) : 0.0;
  out.mc_se = std::sqrt(std::max(var, 0.0) / n);
  out.rhs = l2mu_distance_sq(mu, model, truth, quad_nodes, mc_draws, seed);
  return out;
}

double martingale_term(const Dataset& data, const IntensityModel& model, const IntensityModel& truth, int nodes) {
  check_dims(data, model);
  check_dims(data, truth);
  const auto cuts = merge_breakpoints(model.time_breakpoints(), truth.time_breakpoints());
  double total = 0.0;
  for (const auto& r : data.records()) {
    const auto a = model.slice(r.x);
    const auto a0 = truth.slice(r.x);
    double jumps = 0.0;
    for (double e : r.events) jumps += (*a)(e);
    const double comp = integrate_against_y(r, [&](double t) { return (*a)(t) * (*a0)(t); }, cuts, nodes);
    total += jumps - comp;
  }
  return total / std::sqrt(static_cast<double>(data.size()));
}

double predictable_variation(const Dataset& data, const IntensityModel& model, const IntensityModel& truth,
                             int nodes) {
  check_dims(data, model);
  check_dims(data, truth);
  const auto cuts = merge_breakpoints(model.time_breakpoints(), truth.time_breakpoints());
  double total = 0.0;
  for (const auto& r : data.records()) {
    const auto a = model.slice(r.x);
    const auto a0 = truth.slice(r.x);
    total += integrate_against_y(
        r,
        [&](double t) {
          const double v = (*a)(t);
          return v * v * (*a0)(t);
        },
        cuts, nodes);
  }
  return total / static_cast<double>(data.size());
}

std::vector<BernsteinRow> bernstein_tail_check(const DeviationSetup& setup, const IntensityModel& model,
                                               std::span<const double> z_grid, int replicates, std::uint64_t seed,
                                               int threads) {
  require(replicates >= 100, ErrorCode::kInvalidArgument, "bernstein_tail_check needs at least 100 replicates");
  require(static_cast<bool>(setup.simulate) && setup.truth.valid() && setup.n > 0, ErrorCode::kInvalidArgument,
          "deviation setup is incomplete");
  const double a_sup = model.sup_bound();
  require(std::isfinite(a_sup), ErrorCode::kInvalidArgument, "test model needs a finite sup-norm bound");
  require(std::isfinite(setup.truth_sup) && setup.truth_sup >= 0.0, ErrorCode::kInvalidArgument,
          "truth sup norm must be finite");
  for (double z : z_grid) require(z >= 0.0, ErrorCode::kInvalidArgument, "z grid must be nonnegative");

  const double delta_sq = setup.truth_sup * a_sup * a_sup;
  std::vector<double> z_values(static_cast<std::size_t>(replicates));
  std::vector<double> variations(static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
    const Dataset data = setup.simulate(derive_seed(seed, r));
    z_values[r] = martingale_term(data, model, setup.truth);
    variations[r] = predictable_variation(data, model, setup.truth);
  });

  const double n = static_cast<double>(setup.n);
  std::vector<BernsteinRow> rows;
  for (double z : z_grid) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < z_values.size(); ++r) {
      if (z_values[r] > z && variations[r] <= delta_sq) ++hits;
    }
    BernsteinRow row;
    row.z = z;
    row.mc_tail = static_cast<double>(hits) / replicates;
    row.mc_se = std::sqrt(row.mc_tail * (1.0 - row.mc_tail) / replicates);
    const double denom = 2.0 * (delta_sq + z * a_sup / (3.0 * std::sqrt(n)));
    row.bound = z == 0.0 ? 1.0 : std::exp(-z * z / denom);
    rows.push_back(row);
  }
  return rows;
}

void write_bernstein_csv(std::ostream& out, std::span<const BernsteinRow> rows) {
  out << "z,mc_tail,mc_se,bound\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.z, r.mc_tail, r.mc_se, r.bound);
    out << buf;
  }
}

double log_likelihood_ratio(const Dataset& data, const IntensityModel& a, const IntensityModel& b, int nodes) {
  check_dims(data, a);
  check_dims(data, b);
  const auto cuts = merge_breakpoints(a.time_breakpoints(), b.time_breakpoints());
  double total = 0.0;
  for (const auto& r : data.records()) {
    const auto sa = a.slice(r.x);
    const auto sb = b.slice(r.x);
    auto positive = [&](double t, double va, double vb) {
      if (!(va > 0.0) || !(vb > 0.0)) {
        fail(ErrorCode::kNonPositiveIntensity, "non-positive intensity at record " + std::to_string(r.id) +
                                                   ", t = " + std::to_string(t) + " (a = " + std::to_string(va) +
                                                   ", b = " + std::to_string(vb) + ")");
      }
    };
    for (double e : r.events) {
      const double va = (*sa)(e);
      const double vb = (*sb)(e);
      positive(e, va, vb);
      total += std::log(va / vb);
    }
    total -= integrate_against_y(
        r,
        [&](double t) {
          const double va = (*sa)(t);
          const double vb = (*sb)(t);
          positive(t, va, vb);
          return va - vb;
        },
        cuts, nodes);
  }
  return total;
}

}  // namespace aalen
