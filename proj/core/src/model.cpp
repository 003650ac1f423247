#include "aalen/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aalen/error.hpp"

namespace aalen {
namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

class ClosedFormSlice final : public TimeSlice {
 public:
  ClosedFormSlice(const ClosedFormIntensity& f, std::span<const double> x) : f_(f), x_(x.begin(), x.end()) {}
  double operator()(double t) const override { return f_.value(t, x_); }

 private:
  const ClosedFormIntensity& f_;
  std::vector<double> x_;
};

// Restriction of a sieve to one covariate, optionally clamped to [lo, hi].
class SieveSlice final : public TimeSlice {
 public:
  SieveSlice(const LocalExpansion& local, std::span<const double> x,
             double lo = -std::numeric_limits<double>::infinity(),
             double hi = std::numeric_limits<double>::infinity())
      : m_(local.grid().m[0]), degree_(local.grid().degree[0]), scale_(std::ldexp(1.0, m_)), lo_(lo), hi_(hi) {
    const std::size_t size = local.time_slice_size();
    if (size > kInline) {
      heap_.resize(size);
      coef_ = heap_.data();
    }
    local.time_slice(x, std::span<double>(coef_, size));
    if (degree_ == 1) {
      // c0 + c1 sqrt3 (2(t scale - j) - 1) rewritten as a + b t per cell.
      constexpr double kSqrt3 = 1.7320508075688772;
      for (std::size_t j = 0; j < size / 2; ++j) {
        const double c0 = coef_[2 * j];
        const double c1 = coef_[2 * j + 1] * kSqrt3;
        coef_[2 * j] = c0 - c1 * (2.0 * static_cast<double>(j) + 1.0);
        coef_[2 * j + 1] = 2.0 * c1 * scale_;
      }
    }
  }
  SieveSlice(const SieveSlice&) = delete;
  SieveSlice& operator=(const SieveSlice&) = delete;

  double operator()(double t) const override { return std::clamp(at(t), lo_, hi_); }
  void evaluate(std::span<const double> ts, std::span<double> out) const override {
    const std::size_t last = (std::size_t{1} << m_) - 1;
    if (degree_ == 0) {
      for (std::size_t i = 0; i < ts.size(); ++i) {
        out[i] = std::clamp(coef_[std::min(static_cast<std::size_t>(ts[i] * scale_), last)], lo_, hi_);
      }
    } else if (degree_ == 1) {
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const double* c = coef_ + 2 * std::min(static_cast<std::size_t>(ts[i] * scale_), last);
        out[i] = std::clamp(c[0] + c[1] * ts[i], lo_, hi_);
      }
    } else {
      for (std::size_t i = 0; i < ts.size(); ++i) out[i] = (*this)(ts[i]);
    }
  }

 private:
  static constexpr std::size_t kInline = 64;

  double at(double t) const {
    const std::size_t j = dyadic_cell(t, m_);
    const double* c = coef_ + j * static_cast<std::size_t>(degree_ + 1);
    if (degree_ == 0) return c[0];
    if (degree_ == 1) return c[0] + c[1] * t;
    const double s = t * scale_ - static_cast<double>(j);
    double vals[32];
    shifted_legendre(degree_, s, vals);
    double v = 0.0;
    for (int p = 0; p <= degree_; ++p) v += c[p] * vals[p];
    return v;
  }

  int m_;
  int degree_;
  double scale_;
  double lo_;
  double hi_;
  double inline_[kInline];
  std::vector<double> heap_;
  double* coef_ = inline_;
};

class ClippedSlice final : public TimeSlice {
 public:
  ClippedSlice(std::unique_ptr<TimeSlice> inner, double lo, double hi) : inner_(std::move(inner)), lo_(lo), hi_(hi) {}
  double operator()(double t) const override { return std::clamp((*inner_)(t), lo_, hi_); }
  void evaluate(std::span<const double> ts, std::span<double> out) const override {
    inner_->evaluate(ts, out);
    for (double& v : out) v = std::clamp(v, lo_, hi_);
  }

 private:
  std::unique_ptr<TimeSlice> inner_;
  double lo_;
  double hi_;
};

class MixtureSlice final : public TimeSlice {
 public:
  MixtureSlice(const MixtureIntensity& mix, std::span<const double> x) : weights_(mix.weights) {
    parts_.reserve(mix.components.size());
    for (const auto& c : mix.components) parts_.push_back(c.slice(x));
  }
  double operator()(double t) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) v += weights_[i] * (*parts_[i])(t);
    return v;
  }
  void evaluate(std::span<const double> ts, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    buffer_.resize(ts.size());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      parts_[i]->evaluate(ts, buffer_);
      const double w = weights_[i];
      for (std::size_t k = 0; k < ts.size(); ++k) out[k] += w * buffer_[k];
    }
  }

 private:
  const std::vector<double>& weights_;
  std::vector<std::unique_ptr<TimeSlice>> parts_;
  mutable std::vector<double> buffer_;
};

double project_index(const std::vector<double>& v, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * x[i];
  return index_to_unit(s, v.size());
}

std::vector<double> dyadic_breakpoints(int m) {
  std::vector<double> out;
  const std::size_t cells = std::size_t{1} << m;
  for (std::size_t k = 1; k < cells; ++k) out.push_back(std::ldexp(static_cast<double>(k), -m));
  return out;
}

}  // namespace

StepFunction::StepFunction(std::vector<StepPiece> pieces) : pieces_(std::move(pieces)) {
  double prev_end = -1.0;
  for (const auto& p : pieces_) {
    const auto& iv = p.interval;
    require(iv.start >= 0.0 && iv.start < iv.end && iv.end <= 1.0, ErrorCode::kInvalidArgument,
            "at-risk interval must satisfy 0 <= start < end <= 1");
    require(p.value >= 0.0 && p.value <= 1.0, ErrorCode::kInvalidArgument, "at-risk value must lie in [0, 1]");
    require(iv.start >= prev_end, ErrorCode::kInvalidArgument, "at-risk intervals must be sorted and disjoint");
    prev_end = iv.end;
  }
}

double StepFunction::operator()(double t) const {
  for (const auto& p : pieces_) {
    if (t >= p.interval.start && t <= p.interval.end) return p.value;
  }
  return 0.0;
}

double StepFunction::mass() const {
  double s = 0.0;
  for (const auto& p : pieces_) s += p.value * (p.interval.end - p.interval.start);
  return s;
}

bool StepFunction::at_risk(double t) const {
  for (const auto& p : pieces_) {
    if (t >= p.interval.start && t <= p.interval.end && p.value > 0.0) return true;
  }
  return false;
}

void validate(const PathRecord& record, std::size_t d) {
  const std::string who = "record " + std::to_string(record.id);
  require(record.x.size() == d, ErrorCode::kDimensionMismatch,
          who + ": covariate has " + std::to_string(record.x.size()) + " entries, expected " + std::to_string(d));
  for (double v : record.x) require(in_unit(v), ErrorCode::kOutOfDomain, who + ": covariate outside [0, 1]");
  double prev = 0.0;
  for (double s : record.events) {
    require(s > prev && s <= 1.0, ErrorCode::kInvalidArgument,
            who + ": event times must be strictly increasing in (0, 1]");
    require(record.at_risk.at_risk(s), ErrorCode::kInvalidArgument, who + ": event outside the at-risk support");
    prev = s;
  }
}

Dataset::Dataset(std::size_t d, std::vector<PathRecord> records) : d_(d), records_(std::move(records)) {
  std::vector<std::int64_t> ids;
  ids.reserve(records_.size());
  for (const auto& r : records_) {
    validate(r, d_);
    ids.push_back(r.id);
  }
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorCode::kInvalidArgument,
          "record ids must be unique");
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
  Dataset out;
  out.d_ = d_;
  out.records_.reserve(positions.size());
  for (std::size_t p : positions) {
    require(p < records_.size(), ErrorCode::kInvalidArgument, "subset position out of range");
    out.records_.push_back(records_[p]);
  }
  return out;
}

IntensityModel IntensityModel::closed_form(ClosedFormIntensity spec) {
  require(static_cast<bool>(spec.value), ErrorCode::kInvalidArgument, "closed-form intensity needs an evaluator");
  auto node = std::make_shared<Node>();
  node->d = spec.d;
  node->sup = spec.sup;
  std::sort(spec.time_breakpoints.begin(), spec.time_breakpoints.end());
  node->time_breakpoints = spec.time_breakpoints;
  node->value = std::move(spec);
  return IntensityModel(std::move(node));
}

IntensityModel IntensityModel::constant(std::size_t d, double value) {
  ClosedFormIntensity f;
  f.description = "constant " + std::to_string(value);
  f.d = d;
  f.value = [value](double, std::span<const double>) { return value; };
  f.cumulative = [value](double t, std::span<const double>) { return value * t; };
  f.sup = std::abs(value);
  f.descriptor = {{"family", "constant"}, {"value", value}};
  return closed_form(std::move(f));
}

IntensityModel IntensityModel::sieve(SieveSpec spec, Eigen::VectorXd coefficients) {
  validate(spec);
  require(static_cast<std::size_t>(coefficients.size()) == spec.dimension(), ErrorCode::kDimensionMismatch,
          "sieve coefficient vector must have D_m entries");
  for (double c : coefficients) require(std::isfinite(c), ErrorCode::kInvalidArgument, "non-finite sieve coefficient");
  auto node = std::make_shared<Node>();
  node->d = spec.d;
  node->time_breakpoints = dyadic_breakpoints(spec.m[0]);
  if (spec.d == 1) node->covariate_breakpoints = dyadic_breakpoints(spec.m[1]);
  LocalExpansion local(spec, coefficients);
  node->sup = local.sup_bound();
  node->value = SieveIntensity{std::move(spec), std::move(coefficients), std::move(local)};
  return IntensityModel(std::move(node));
}

IntensityModel IntensityModel::clipped(IntensityModel inner, double lower, double upper) {
  require(inner.valid(), ErrorCode::kInvalidArgument, "clipped model needs an inner model");
  require(std::isfinite(lower) && std::isfinite(upper) && lower <= upper, ErrorCode::kInvalidArgument,
          "clip bounds must satisfy lower <= upper");
  auto node = std::make_shared<Node>();
  node->d = inner.dimension();
  node->time_breakpoints = inner.time_breakpoints();
  node->covariate_breakpoints = inner.covariate_breakpoints();
  node->sup = std::min(inner.sup_bound(), std::max(std::abs(lower), std::abs(upper)));
  node->value = ClippedIntensity{std::move(inner), lower, upper};
  return IntensityModel(std::move(node));
}

IntensityModel IntensityModel::mixture(std::vector<double> weights, std::vector<IntensityModel> components) {
  require(!components.empty() && weights.size() == components.size(), ErrorCode::kInvalidArgument,
          "mixture needs one weight per component and at least one component");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorCode::kInvalidArgument, "mixture weights must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::kInvalidArgument, "mixture weights must sum to 1");
  auto node = std::make_shared<Node>();
  node->d = components.front().dimension();
  node->sup = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    require(c.valid() && c.dimension() == node->d, ErrorCode::kDimensionMismatch,
            "mixture components must share the covariate dimension");
    node->time_breakpoints = merge_breakpoints(node->time_breakpoints, c.time_breakpoints());
    node->covariate_breakpoints = merge_breakpoints(node->covariate_breakpoints, c.covariate_breakpoints());
    node->sup = std::max(node->sup, c.sup_bound());
  }
  node->value = MixtureIntensity{std::move(weights), std::move(components)};
  return IntensityModel(std::move(node));
}

IntensityModel IntensityModel::single_index(IntensityModel link, std::vector<double> index) {
  require(link.valid() && link.dimension() == 1, ErrorCode::kDimensionMismatch,
          "single-index link must have one covariate");
  require(!index.empty(), ErrorCode::kInvalidArgument, "single-index vector must be nonempty");
  double norm = 0.0;
  for (double v : index) norm += v * v;
  require(std::abs(std::sqrt(norm) - 1.0) <= 1e-12, ErrorCode::kInvalidArgument, "single-index vector must be a unit vector");
  auto node = std::make_shared<Node>();
  node->d = index.size();
  node->time_breakpoints = link.time_breakpoints();
  if (index.size() == 1) {
    // u = (v x + 1) / 2 with v = +-1, so x = v (2u - 1).
    for (double u : link.covariate_breakpoints()) {
      const double x = index[0] * (2.0 * u - 1.0);
      if (x > 0.0 && x < 1.0) node->covariate_breakpoints.push_back(x);
    }
    std::sort(node->covariate_breakpoints.begin(), node->covariate_breakpoints.end());
  }
  node->sup = link.sup_bound();
  node->value = SingleIndexIntensity{std::move(link), std::move(index)};
  return IntensityModel(std::move(node));
}

IntensityModel::Kind IntensityModel::kind() const { return static_cast<Kind>(node_->value.index()); }

std::size_t IntensityModel::dimension() const { return node_->d; }

const std::vector<double>& IntensityModel::time_breakpoints() const { return node_->time_breakpoints; }

const std::vector<double>& IntensityModel::covariate_breakpoints() const { return node_->covariate_breakpoints; }

double IntensityModel::sup_bound() const { return node_->sup; }

double IntensityModel::operator()(double t, std::span<const double> x) const {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ClosedFormIntensity>) {
          return v.value(t, x);
        } else if constexpr (std::is_same_v<T, SieveIntensity>) {
          return v.local.value(t, x);
        } else if constexpr (std::is_same_v<T, ClippedIntensity>) {
          return std::clamp(v.inner(t, x), v.lower, v.upper);
        } else if constexpr (std::is_same_v<T, MixtureIntensity>) {
          double s = 0.0;
          for (std::size_t i = 0; i < v.components.size(); ++i) s += v.weights[i] * v.components[i](t, x);
          return s;
        } else {
          const double u = project_index(v.index, x);
          return v.link(t, std::span<const double>(&u, 1));
        }
      },
      node_->value);
}

std::unique_ptr<TimeSlice> IntensityModel::slice(std::span<const double> x) const {
  return std::visit(
      [&](const auto& v) -> std::unique_ptr<TimeSlice> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ClosedFormIntensity>) {
          return std::make_unique<ClosedFormSlice>(v, x);
        } else if constexpr (std::is_same_v<T, SieveIntensity>) {
          return std::make_unique<SieveSlice>(v.local, x);
        } else if constexpr (std::is_same_v<T, ClippedIntensity>) {
          if (const auto* sieve = std::get_if<SieveIntensity>(&v.inner.node_->value)) {
            return std::make_unique<SieveSlice>(sieve->local, x, v.lower, v.upper);
          }
          return std::make_unique<ClippedSlice>(v.inner.slice(x), v.lower, v.upper);
        } else if constexpr (std::is_same_v<T, MixtureIntensity>) {
          return std::make_unique<MixtureSlice>(v, x);
        } else {
          const double u = project_index(v.index, x);
          return v.link.slice(std::span<const double>(&u, 1));
        }
      },
      node_->value);
}

void IntensityModel::evaluate_grid(std::span<const double> xs, std::span<const double> ts,
                                   std::span<double> out) const {
  const std::size_t d = dimension();
  const std::size_t rows = xs.size() / d;
  if (const auto* mix = std::get_if<MixtureIntensity>(&node_->value)) {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> part(out.size());
    for (std::size_t c = 0; c < mix->components.size(); ++c) {
      mix->components[c].evaluate_grid(xs, ts, part);
      const double w = mix->weights[c];
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * part[k];
    }
    return;
  }
  for (std::size_t i = 0; i < rows; ++i) {
    slice(xs.subspan(i * d, d))->evaluate(ts, out.subspan(i * ts.size(), ts.size()));
  }
}

double evaluate(const IntensityModel& model, double t, std::span<const double> x) {
  require(model.valid(), ErrorCode::kInvalidArgument, "empty intensity model");
  require(x.size() == model.dimension(), ErrorCode::kDimensionMismatch,
          "covariate has " + std::to_string(x.size()) + " entries, model expects " +
              std::to_string(model.dimension()));
  require(in_unit(t), ErrorCode::kOutOfDomain, "time outside [0, 1]");
  for (double v : x) require(in_unit(v), ErrorCode::kOutOfDomain, "covariate outside [0, 1]");
  return model(t, x);
}

double integrate_against_y(const PathRecord& record, const std::function<double(double)>& f,
                           std::span<const double> breakpoints, int nodes) {
  return integrate_against_y(record, [&](double t) { return f(t); }, breakpoints, nodes);
}

void TimeSlice::evaluate(std::span<const double> ts, std::span<double> out) const {
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = (*this)(ts[i]);
}

namespace {

template <class Sink>
void for_each_y_node(const StepFunction& at_risk, std::span<const double> breakpoints, const GaussLegendre& rule,
                     Sink&& sink) {
  const auto nodes = rule.nodes.size();
  for (const StepPiece& piece : at_risk.pieces()) {
    if (piece.value == 0.0) continue;
    const double b = piece.interval.end;
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), piece.interval.start);
    double lo = piece.interval.start;
    while (lo < b) {
      double hi = b;
      if (it != breakpoints.end() && *it < b) {
        hi = *it;
        ++it;
      }
      const double width = hi - lo;
      for (std::size_t k = 0; k < nodes; ++k) sink(lo + width * rule.nodes[k], piece.value * width * rule.weights[k]);
      lo = hi;
    }
  }
}

}  // namespace

void y_quadrature(const PathRecord& record, std::span<const double> breakpoints, int nodes, YQuadrature& out) {
  out.t.clear();
  out.w.clear();
  for_each_y_node(record.at_risk, breakpoints, gauss_legendre(nodes), [&](double t, double w) {
    out.t.push_back(t);
    out.w.push_back(w);
  });
}

QuadratureCache::QuadratureCache(const Dataset& data) {
  at_risk_.reserve(data.size());
  for (const auto& r : data.records()) at_risk_.push_back(r.at_risk);
}

const DatasetQuadrature& QuadratureCache::get(std::span<const double> breakpoints, int nodes) const {
  const GaussLegendre& rule = gauss_legendre(nodes);
  std::pair<std::vector<double>, int> key(std::vector<double>(breakpoints.begin(), breakpoints.end()), nodes);
  const std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = table_[std::move(key)];
  if (!slot) {
    auto q = std::make_unique<DatasetQuadrature>();
    q->offset.reserve(at_risk_.size() + 1);
    q->offset.push_back(0);
    for (const StepFunction& y : at_risk_) {
      for_each_y_node(y, breakpoints, rule, [&](double t, double w) {
        q->t.push_back(t);
        q->w.push_back(w);
      });
      q->offset.push_back(q->t.size());
    }
    slot = std::move(q);
  }
  return *slot;
}

std::vector<double> merge_breakpoints(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MuMeasure MuMeasure::empirical(Dataset data) {
  require(!data.empty(), ErrorCode::kEmptyDataset, "empirical measure needs at least one record");
  MuMeasure mu;
  mu.value_ = EmpiricalMu{std::make_shared<const Dataset>(std::move(data))};
  return mu;
}

MuMeasure MuMeasure::closed_form(ClosedFormMu cf) {
  require(static_cast<bool>(cf.survivor) && static_cast<bool>(cf.density), ErrorCode::kInvalidArgument,
          "closed-form measure needs survivor and density evaluators");
  MuMeasure mu;
  mu.value_ = std::move(cf);
  return mu;
}

std::size_t MuMeasure::d() const {
  return is_empirical() ? as_empirical().data->d() : as_closed_form().d;
}

}  // namespace aalen
