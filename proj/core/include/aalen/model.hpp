#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "aalen/quadrature.hpp"
#include "aalen/sieves.hpp"

namespace aalen {

inline constexpr int kDefaultQuadNodes = 8;

struct Interval {
  double start = 0.0;
  double end = 1.0;
  bool operator==(const Interval&) const = default;
};

struct StepPiece {
  Interval interval;
  double value = 1.0;
  bool operator==(const StepPiece&) const = default;
};

// Piecewise-constant at-risk process Y(t) with values in [0, 1]; zero off the pieces.
class StepFunction {
 public:
  StepFunction() = default;
  explicit StepFunction(std::vector<StepPiece> pieces);

  const std::vector<StepPiece>& pieces() const { return pieces_; }
  double operator()(double t) const;
  double mass() const;
  // True when t lies in a (closed) piece with positive value.
  bool at_risk(double t) const;

 private:
  std::vector<StepPiece> pieces_;
};

// One observed individual (X_i, N^i, Y^i).
struct PathRecord {
  std::int64_t id = 0;
  std::vector<double> x;
  std::vector<double> events;
  StepFunction at_risk;
};

void validate(const PathRecord& record, std::size_t d);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t d, std::vector<PathRecord> records);

  std::size_t d() const { return d_; }
  const std::vector<PathRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const PathRecord& operator[](std::size_t i) const { return records_[i]; }

  // Records at the given positions, in that order.
  Dataset subset(std::span<const std::size_t> positions) const;

 private:
  std::size_t d_ = 0;
  std::vector<PathRecord> records_;
};

// t -> alpha(t, x) for a fixed covariate vector.
class TimeSlice {
 public:
  virtual ~TimeSlice() = default;
  virtual double operator()(double t) const = 0;
  // out[i] = alpha(ts[i]) for the whole batch.
  virtual void evaluate(std::span<const double> ts, std::span<double> out) const;
};

using CovariateFunction = std::function<double(double, std::span<const double>)>;

struct ClosedFormIntensity {
  std::string description;
  std::size_t d = 1;
  CovariateFunction value;
  CovariateFunction cumulative;  // optional: t -> int_0^t alpha(u, x) du
  double sup = std::numeric_limits<double>::infinity();
  std::vector<double> time_breakpoints;
  nlohmann::json descriptor;  // named-family parameters; null for ad-hoc functions
};

// A nonnegative intensity alpha(t, x) on [0,1]^{d+1}. Immutable; copies share the tree.
class IntensityModel {
 public:
  enum class Kind { kClosedForm, kSieve, kClipped, kMixture, kSingleIndex };
  struct Node;

  IntensityModel() = default;

  static IntensityModel closed_form(ClosedFormIntensity spec);
  static IntensityModel constant(std::size_t d, double value);
  static IntensityModel sieve(SieveSpec spec, Eigen::VectorXd coefficients);
  static IntensityModel clipped(IntensityModel inner, double lower, double upper);
  static IntensityModel mixture(std::vector<double> weights, std::vector<IntensityModel> components);
  // alpha(t, x) = link(t, (v'x + sqrt(d)) / (2 sqrt(d))) with a 1-covariate link.
  static IntensityModel single_index(IntensityModel link, std::vector<double> index);

  bool valid() const { return static_cast<bool>(node_); }
  Kind kind() const;
  std::size_t dimension() const;
  const Node& node() const { return *node_; }

  // Unchecked evaluation; use aalen::evaluate for validated input.
  double operator()(double t, std::span<const double> x) const;
  std::unique_ptr<TimeSlice> slice(std::span<const double> x) const;
  // out[i * ts.size() + k] = alpha(ts[k], x_i) for the covariates stacked row-wise in xs.
  // Mixtures run component by component, which keeps each member's data hot across the block.
  void evaluate_grid(std::span<const double> xs, std::span<const double> ts, std::span<double> out) const;

  // Sorted interior time points where the model may be non-smooth.
  const std::vector<double>& time_breakpoints() const;
  // Same for the covariate axis when d == 1 (used by grid quadrature).
  const std::vector<double>& covariate_breakpoints() const;
  // Upper bound on sup |alpha|; infinity when unknown.
  double sup_bound() const;

 private:
  explicit IntensityModel(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct SieveIntensity {
  SieveSpec spec;
  Eigen::VectorXd coefficients;
  LocalExpansion local;
};

struct ClippedIntensity {
  IntensityModel inner;
  double lower = 0.0;
  double upper = 1.0;
};

struct MixtureIntensity {
  std::vector<double> weights;
  std::vector<IntensityModel> components;
};

struct SingleIndexIntensity {
  IntensityModel link;
  std::vector<double> index;
};

struct IntensityModel::Node {
  std::variant<ClosedFormIntensity, SieveIntensity, ClippedIntensity, MixtureIntensity, SingleIndexIntensity> value;
  std::size_t d = 1;
  std::vector<double> time_breakpoints;
  std::vector<double> covariate_breakpoints;
  double sup = std::numeric_limits<double>::infinity();
};

// Validated evaluation: dimension and unit-cube checks, then alpha(t, x).
double evaluate(const IntensityModel& model, double t, std::span<const double> x);

// Affine map of v'x into [0, 1] used by single-index models and projected datasets.
inline double index_to_unit(double projection, std::size_t d) {
  const double root = std::sqrt(static_cast<double>(d));
  return (projection + root) / (2.0 * root);
}

// Composite Gauss-Legendre integral of f(t) Y(t) over [0, 1]. Each at-risk
// piece is split at the given (sorted) breakpoints so that no quadrature cell
// straddles a discontinuity of f.
template <class F>
double integrate_against_y(const PathRecord& record, F&& f, std::span<const double> breakpoints,
                           int nodes = kDefaultQuadNodes) {
  const GaussLegendre& rule = gauss_legendre(nodes);
  double total = 0.0;
  for (const StepPiece& piece : record.at_risk.pieces()) {
    if (piece.value == 0.0) continue;
    const double a = piece.interval.start;
    const double b = piece.interval.end;
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), a);
    double lo = a;
    double piece_sum = 0.0;
    while (lo < b) {
      double hi = b;
      if (it != breakpoints.end() && *it < b) {
        hi = *it;
        ++it;
      }
      const double width = hi - lo;
      double cell = 0.0;
      for (int k = 0; k < nodes; ++k) cell += rule.weights[k] * f(lo + width * rule.nodes[k]);
      piece_sum += width * cell;
      lo = hi;
    }
    total += piece.value * piece_sum;
  }
  return total;
}

double integrate_against_y(const PathRecord& record, const std::function<double(double)>& f,
                           std::span<const double> breakpoints = {}, int nodes = kDefaultQuadNodes);

// Flattened form of integrate_against_y: sum_i w[i] f(t[i]) gives the same integral.
struct YQuadrature {
  std::vector<double> t;
  std::vector<double> w;
};
void y_quadrature(const PathRecord& record, std::span<const double> breakpoints, int nodes, YQuadrature& out);

// y_quadrature of every record for one breakpoint set; record i owns [offset[i], offset[i + 1]).
struct DatasetQuadrature {
  std::vector<double> t;
  std::vector<double> w;
  std::vector<std::size_t> offset;

  std::span<const double> times(std::size_t i) const { return {t.data() + offset[i], offset[i + 1] - offset[i]}; }
  std::span<const double> weights(std::size_t i) const { return {w.data() + offset[i], offset[i + 1] - offset[i]}; }
};

// Thread-safe memo of DatasetQuadrature per (breakpoints, nodes). Only the at-risk
// processes matter, so one cache serves every dataset sharing them.
class QuadratureCache {
 public:
  explicit QuadratureCache(const Dataset& data);
  const DatasetQuadrature& get(std::span<const double> breakpoints, int nodes) const;
  std::size_t records() const { return at_risk_.size(); }

 private:
  std::vector<StepFunction> at_risk_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::vector<double>, int>, std::unique_ptr<DatasetQuadrature>> table_;
};

// Sorted union of breakpoint sets.
std::vector<double> merge_breakpoints(std::span<const double> a, std::span<const double> b);

// Reference measure mu on [0,1]^{d+1}.
struct EmpiricalMu {
  std::shared_ptr<const Dataset> data;
};

struct ClosedFormMu {
  std::size_t d = 1;
  CovariateFunction survivor;                         // s(t | x) = E[Y(t) | X = x]
  std::function<double(std::span<const double>)> density;  // f_X on [0,1]^d
};

class MuMeasure {
 public:
  static MuMeasure empirical(Dataset data);
  static MuMeasure closed_form(ClosedFormMu mu);

  std::size_t d() const;
  bool is_empirical() const { return std::holds_alternative<EmpiricalMu>(value_); }
  const EmpiricalMu& as_empirical() const { return std::get<EmpiricalMu>(value_); }
  const ClosedFormMu& as_closed_form() const { return std::get<ClosedFormMu>(value_); }

 private:
  std::variant<EmpiricalMu, ClosedFormMu> value_;
};

}  // namespace aalen
