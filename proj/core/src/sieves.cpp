#include "aalen/sieves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aalen/error.hpp"
#include "aalen/quadrature.hpp"

namespace aalen {
namespace {

constexpr int kMaxResolution = 30;

std::string describe(const SieveSpec& spec) {
  std::string s = spec.family == SieveFamily::kHaar ? "haar m=(" : "pp m=(";
  for (std::size_t i = 0; i < spec.m.size(); ++i) s += (i ? "," : "") + std::to_string(spec.m[i]);
  s += ") l=(";
  for (std::size_t i = 0; i < spec.l.size(); ++i) s += (i ? "," : "") + std::to_string(spec.l[i]);
  return s + ")";
}

bool in_support(double u, double lo, double hi) { return (u >= lo && u < hi) || (hi == 1.0 && u == 1.0); }

// Haar function k on one axis: k = 0 is the scaling function, k = 2^level + q a wavelet.
struct HaarIndex {
  int level = -1;
  std::size_t q = 0;
};

HaarIndex haar_index(std::size_t k) {
  if (k == 0) return {};
  int level = 0;
  while ((std::size_t{2} << level) <= k) ++level;
  return {level, k - (std::size_t{1} << level)};
}

double haar_value(std::size_t k, double u) {
  const HaarIndex h = haar_index(k);
  if (h.level < 0) return 1.0;
  const double width = std::ldexp(1.0, -h.level);
  const double lo = static_cast<double>(h.q) * width;
  const double hi = lo + width;
  if (!in_support(u, lo, hi)) return 0.0;
  const double amp = std::sqrt(std::ldexp(1.0, h.level));
  return u < lo + 0.5 * width ? amp : -amp;
}

// Applies Q (or its transpose) along one axis of a row-major tensor.
void haar_axis_transform(Eigen::VectorXd& v, const std::vector<std::size_t>& shape, std::size_t axis,
                         bool transpose) {
  const std::size_t n = shape[axis];
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const std::size_t outer = static_cast<std::size_t>(v.size()) / (n * inner);
  int m = 0;
  while ((std::size_t{1} << m) < n) ++m;
  const double base = std::ldexp(1.0, -m);
  std::vector<double> line(n);
  std::vector<double> out(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      for (std::size_t i = 0; i < n; ++i) line[i] = v[(o * n + i) * inner + in];
      std::fill(out.begin(), out.end(), 0.0);
      // Column k of Q holds psi_k on each cell times 2^{-m/2}.
      for (std::size_t k = 0; k < n; ++k) {
        const HaarIndex h = haar_index(k);
        const std::size_t span = h.level < 0 ? n : (n >> h.level);
        const std::size_t first = h.level < 0 ? 0 : h.q * span;
        const double amp = std::sqrt(base * (h.level < 0 ? 1.0 : std::ldexp(1.0, h.level)));
        for (std::size_t j = first; j < first + span; ++j) {
          const double q = (h.level < 0 || j < first + span / 2) ? amp : -amp;
          if (transpose) {
            out[k] += q * line[j];
          } else {
            out[j] += q * line[k];
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) v[(o * n + i) * inner + in] = out[i];
    }
  }
}

Eigen::VectorXd haar_transform(const SieveSpec& spec, Eigen::VectorXd v, bool transpose) {
  std::vector<std::size_t> shape(spec.axes());
  for (std::size_t a = 0; a < spec.axes(); ++a) shape[a] = std::size_t{1} << spec.m[a];
  for (std::size_t a = 0; a < spec.axes(); ++a) haar_axis_transform(v, shape, a, transpose);
  return v;
}

}  // namespace

std::size_t SieveSpec::dimension() const {
  double dim = 1.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    dim *= std::ldexp(1.0, m[i]) * (family == SieveFamily::kHaar ? 1.0 : (l[i] + 1.0));
  }
  return dim >= 9.0e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(dim);
}

int SieveSpec::cell_degree(std::size_t axis) const {
  return family == SieveFamily::kHaar ? 0 : l[axis];
}

void validate(const SieveSpec& spec, std::size_t cap) {
  require(spec.d >= 1 && spec.d <= kMaxCovariates, ErrorCode::kInvalidArgument,
          "sieve covariate dimension must lie in [1, " + std::to_string(kMaxCovariates) + "]");
  require(spec.m.size() == spec.axes() && spec.l.size() == spec.axes(), ErrorCode::kInvalidArgument,
          "sieve m and l must have d+1 entries");
  for (std::size_t i = 0; i < spec.axes(); ++i) {
    require(spec.m[i] >= 0 && spec.m[i] <= kMaxResolution, ErrorCode::kInvalidArgument,
            "sieve resolution out of range in " + describe(spec));
    require(spec.l[i] >= 0 && spec.l[i] <= 20, ErrorCode::kInvalidArgument,
            "sieve degree out of range in " + describe(spec));
    if (spec.family == SieveFamily::kHaar) {
      require(spec.l[i] == 1, ErrorCode::kInvalidArgument, "Haar sieves have exactly one vanishing moment");
    }
  }
  require(std::isfinite(spec.clip) && spec.clip > 0.0, ErrorCode::kInvalidArgument, "clip bound must be > 0");
  const std::size_t dim = spec.dimension();
  require(dim <= cap, ErrorCode::kCapExceeded,
          "D_m = " + std::to_string(dim) + " exceeds cap " + std::to_string(cap) + " for " + describe(spec));
}

void shifted_legendre(int degree, double s, double* out) {
  const double z = 2.0 * s - 1.0;
  double p_prev = 1.0;
  double p = z;
  out[0] = 1.0;
  if (degree >= 1) out[1] = std::sqrt(3.0) * z;
  for (int k = 2; k <= degree; ++k) {
    const double next = ((2.0 * k - 1.0) * z * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = next;
    out[k] = std::sqrt(2.0 * k + 1.0) * p;
  }
}

CellGrid::CellGrid(const SieveSpec& spec) {
  m = spec.m;
  degree.resize(spec.axes());
  cells_per_axis.resize(spec.axes());
  for (std::size_t a = 0; a < spec.axes(); ++a) {
    degree[a] = spec.cell_degree(a);
    cells_per_axis[a] = std::size_t{1} << m[a];
    cells *= cells_per_axis[a];
    block *= static_cast<std::size_t>(degree[a] + 1);
  }
}

TensorBasis::TensorBasis(SieveSpec spec, std::size_t cap) : spec_(std::move(spec)) {
  validate(spec_, cap);
  grid_ = CellGrid(spec_);
  size_ = spec_.dimension();
}

std::vector<std::size_t> TensorBasis::axis_indices(std::size_t index) const {
  // Piecewise polynomials: (cell j_a, degree p_a) per axis; Haar: axis function k_a.
  const std::size_t axes = spec_.axes();
  std::vector<std::size_t> out(2 * axes, 0);
  if (spec_.family == SieveFamily::kHaar) {
    for (std::size_t a = axes; a-- > 0;) {
      out[a] = index % grid_.cells_per_axis[a];
      index /= grid_.cells_per_axis[a];
    }
    return out;
  }
  std::size_t cell = index / grid_.block;
  std::size_t local = index % grid_.block;
  for (std::size_t a = axes; a-- > 0;) {
    out[a] = cell % grid_.cells_per_axis[a];
    cell /= grid_.cells_per_axis[a];
    const auto deg = static_cast<std::size_t>(grid_.degree[a] + 1);
    out[axes + a] = local % deg;
    local /= deg;
  }
  return out;
}

double TensorBasis::value(std::size_t index, std::span<const double> point) const {
  require(point.size() == spec_.axes(), ErrorCode::kDimensionMismatch, "basis evaluation point has wrong size");
  require(index < size_, ErrorCode::kInvalidArgument, "basis index out of range");
  const auto idx = axis_indices(index);
  const std::size_t axes = spec_.axes();
  double v = 1.0;
  for (std::size_t a = 0; a < axes; ++a) {
    if (spec_.family == SieveFamily::kHaar) {
      v *= haar_value(idx[a], point[a]);
    } else {
      const double width = std::ldexp(1.0, -spec_.m[a]);
      const double lo = static_cast<double>(idx[a]) * width;
      if (!in_support(point[a], lo, lo + width)) return 0.0;
      double vals[32];
      const int p = static_cast<int>(idx[axes + a]);
      shifted_legendre(p, (point[a] - lo) / width, vals);
      v *= vals[p] / std::sqrt(width);
    }
    if (v == 0.0) return 0.0;
  }
  return v;
}

std::vector<AxisSupport> TensorBasis::support(std::size_t index) const {
  const auto idx = axis_indices(index);
  std::vector<AxisSupport> out(spec_.axes());
  for (std::size_t a = 0; a < spec_.axes(); ++a) {
    if (spec_.family == SieveFamily::kHaar) {
      const HaarIndex h = haar_index(idx[a]);
      if (h.level >= 0) {
        const double width = std::ldexp(1.0, -h.level);
        out[a] = {static_cast<double>(h.q) * width, static_cast<double>(h.q + 1) * width};
      }
    } else {
      const double width = std::ldexp(1.0, -spec_.m[a]);
      out[a] = {static_cast<double>(idx[a]) * width, static_cast<double>(idx[a] + 1) * width};
    }
  }
  return out;
}

std::vector<double> TensorBasis::breakpoints(std::size_t index, std::size_t axis) const {
  require(axis < spec_.axes(), ErrorCode::kInvalidArgument, "axis out of range");
  const AxisSupport s = support(index)[axis];
  std::vector<double> pts{s.lo, s.hi};
  if (spec_.family == SieveFamily::kHaar && haar_index(axis_indices(index)[axis]).level >= 0) {
    pts.insert(pts.begin() + 1, 0.5 * (s.lo + s.hi));
  }
  std::vector<double> out;
  for (double p : pts) {
    if (p > 0.0 && p < 1.0) out.push_back(p);
  }
  return out;
}

void TensorBasis::active(std::span<const double> point, std::vector<std::pair<std::size_t, double>>& out) const {
  require(point.size() == spec_.axes(), ErrorCode::kDimensionMismatch, "basis evaluation point has wrong size");
  out.clear();
  const std::size_t axes = spec_.axes();
  // Per-axis nonzero (axis index, value) lists, then their tensor product.
  std::vector<std::vector<std::pair<std::size_t, double>>> lists(axes);
  std::size_t cell = 0;
  for (std::size_t a = 0; a < axes; ++a) {
    const int m = spec_.m[a];
    if (spec_.family == SieveFamily::kHaar) {
      lists[a].emplace_back(0, 1.0);
      for (int level = 0; level < m; ++level) {
        const std::size_t q = dyadic_cell(point[a], level);
        const std::size_t k = (std::size_t{1} << level) + q;
        lists[a].emplace_back(k, haar_value(k, point[a]));
      }
    } else {
      const std::size_t j = dyadic_cell(point[a], m);
      cell = cell * grid_.cells_per_axis[a] + j;
      const double width = std::ldexp(1.0, -m);
      double vals[32];
      shifted_legendre(grid_.degree[a], point[a] / width - static_cast<double>(j), vals);
      for (int p = 0; p <= grid_.degree[a]; ++p) lists[a].emplace_back(p, vals[p] / std::sqrt(width));
    }
  }
  std::vector<std::size_t> pos(axes, 0);
  while (true) {
    std::size_t flat = 0;
    double v = 1.0;
    for (std::size_t a = 0; a < axes; ++a) {
      const auto& [k, val] = lists[a][pos[a]];
      flat = flat * (spec_.family == SieveFamily::kHaar ? grid_.cells_per_axis[a]
                                                         : static_cast<std::size_t>(grid_.degree[a] + 1)) +
             k;
      v *= val;
    }
    if (spec_.family == SieveFamily::kPiecewisePoly) flat += cell * grid_.block;
    out.emplace_back(flat, v);
    std::size_t a = axes;
    while (a > 0) {
      --a;
      if (++pos[a] < lists[a].size()) break;
      pos[a] = 0;
      if (a == 0) return;
    }
    if (axes == 0) return;
  }
}

TensorBasis basis_functions(const SieveSpec& spec, std::size_t cap) { return TensorBasis(spec, cap); }

Eigen::VectorXd local_from_spec(const SieveSpec& spec, const Eigen::VectorXd& spec_coefficients) {
  require(static_cast<std::size_t>(spec_coefficients.size()) == spec.dimension(), ErrorCode::kDimensionMismatch,
          "coefficient vector length differs from D_m");
  if (spec.family == SieveFamily::kPiecewisePoly) return spec_coefficients;
  return haar_transform(spec, spec_coefficients, false);
}

Eigen::VectorXd spec_from_local(const SieveSpec& spec, const Eigen::VectorXd& local_coefficients) {
  require(static_cast<std::size_t>(local_coefficients.size()) == spec.dimension(), ErrorCode::kDimensionMismatch,
          "coefficient vector length differs from D_m");
  if (spec.family == SieveFamily::kPiecewisePoly) return local_coefficients;
  return haar_transform(spec, local_coefficients, true);
}

Eigen::SparseMatrix<double> change_of_basis(const SieveSpec& spec) {
  const auto dim = static_cast<Eigen::Index>(spec.dimension());
  Eigen::SparseMatrix<double> q(dim, dim);
  if (spec.family == SieveFamily::kPiecewisePoly) {
    q.setIdentity();
    return q;
  }
  // Kronecker product of the per-axis Haar synthesis matrices.
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::vector<Entry> acc{{0, 0, 1.0}};
  for (std::size_t a = 0; a < spec.axes(); ++a) {
    const std::size_t n = std::size_t{1} << spec.m[a];
    std::vector<Entry> axis;
    for (std::size_t k = 0; k < n; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      e[static_cast<Eigen::Index>(k)] = 1.0;
      haar_axis_transform(e, {n}, 0, false);
      for (std::size_t j = 0; j < n; ++j) {
        if (e[static_cast<Eigen::Index>(j)] != 0.0) axis.push_back({j, k, e[static_cast<Eigen::Index>(j)]});
      }
    }
    std::vector<Entry> next;
    next.reserve(acc.size() * axis.size());
    for (const auto& x : acc) {
      for (const auto& y : axis) next.push_back({x.row * n + y.row, x.col * n + y.col, x.value * y.value});
    }
    acc.swap(next);
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(acc.size());
  for (const auto& e : acc) {
    triplets.emplace_back(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col), e.value);
  }
  q.setFromTriplets(triplets.begin(), triplets.end());
  return q;
}

LocalExpansion::LocalExpansion(const SieveSpec& spec, const Eigen::VectorXd& spec_coefficients)
    : grid_(spec), local_(local_from_spec(spec, spec_coefficients)) {}

double LocalExpansion::value(double t, std::span<const double> x) const {
  const std::size_t axes = grid_.axes();
  double vals[8][32];
  std::size_t cell = 0;
  for (std::size_t a = 0; a < axes; ++a) {
    const double u = a == 0 ? t : x[a - 1];
    const std::size_t j = dyadic_cell(u, grid_.m[a]);
    cell = cell * grid_.cells_per_axis[a] + j;
    const double scale = std::ldexp(1.0, grid_.m[a]);
    shifted_legendre(grid_.degree[a], u * scale - static_cast<double>(j), vals[a]);
    const double norm = std::sqrt(scale);
    for (int p = 0; p <= grid_.degree[a]; ++p) vals[a][p] *= norm;
  }
  const double* coef = local_.data() + cell * grid_.block;
  // Row-major contraction over local indices.
  double total = 0.0;
  std::size_t pos[8] = {0};
  for (std::size_t local = 0; local < grid_.block; ++local) {
    double w = coef[local];
    for (std::size_t a = 0; a < axes; ++a) w *= vals[a][pos[a]];
    total += w;
    for (std::size_t a = axes; a-- > 0;) {
      if (++pos[a] <= static_cast<std::size_t>(grid_.degree[a])) break;
      pos[a] = 0;
    }
  }
  return total;
}

void LocalExpansion::time_slice(std::span<const double> x, std::vector<double>& out) const {
  out.resize(time_slice_size());
  time_slice(x, std::span<double>(out));
}

void LocalExpansion::time_slice(std::span<const double> x, std::span<double> out) const {
  const std::size_t axes = grid_.axes();
  const std::size_t deg_t = static_cast<std::size_t>(grid_.degree[0]) + 1;
  const std::size_t cov_block = grid_.block / deg_t;
  std::size_t cov_cell = 0;
  std::size_t cov_cells = 1;
  // Tensor of covariate basis values, row-major over covariate local indices,
  // expanded in place one axis at a time.
  thread_local std::vector<double> weights;
  weights.resize(cov_block);
  weights[0] = std::sqrt(std::ldexp(1.0, grid_.m[0]));
  std::size_t filled = 1;
  double vals[32];
  for (std::size_t a = 1; a < axes; ++a) {
    const double u = x[a - 1];
    const std::size_t j = dyadic_cell(u, grid_.m[a]);
    cov_cell = cov_cell * grid_.cells_per_axis[a] + j;
    cov_cells *= grid_.cells_per_axis[a];
    const double scale = std::ldexp(1.0, grid_.m[a]);
    shifted_legendre(grid_.degree[a], u * scale - static_cast<double>(j), vals);
    const double norm = std::sqrt(scale);
    const auto k = static_cast<std::size_t>(grid_.degree[a] + 1);
    for (std::size_t i = filled; i-- > 0;) {
      const double w = weights[i] * norm;
      for (std::size_t p = k; p-- > 0;) weights[i * k + p] = w * vals[p];
    }
    filled *= k;
  }
  const std::size_t time_cells = grid_.cells_per_axis[0];
  for (std::size_t jt = 0; jt < time_cells; ++jt) {
    const double* coef = local_.data() + (jt * cov_cells + cov_cell) * grid_.block;
    for (std::size_t pt = 0; pt < deg_t; ++pt) {
      double s = 0.0;
      const double* row = coef + pt * cov_block;
      for (std::size_t c = 0; c < cov_block; ++c) s += row[c] * weights[c];
      out[jt * deg_t + pt] = s;
    }
  }
}

double LocalExpansion::sup_bound() const {
  const std::size_t axes = grid_.axes();
  // Sup of each local basis function: prod_a 2^{m_a/2} sqrt(2 p_a + 1).
  std::vector<double> sup(grid_.block, 1.0);
  for (std::size_t local = 0; local < grid_.block; ++local) {
    std::size_t rest = local;
    for (std::size_t a = axes; a-- > 0;) {
      const auto deg = static_cast<std::size_t>(grid_.degree[a] + 1);
      const std::size_t p = rest % deg;
      rest /= deg;
      sup[local] *= std::sqrt(std::ldexp(1.0, grid_.m[a]) * (2.0 * static_cast<double>(p) + 1.0));
    }
  }
  double best = 0.0;
  for (std::size_t cell = 0; cell < grid_.cells; ++cell) {
    double s = 0.0;
    for (std::size_t local = 0; local < grid_.block; ++local) {
      s += std::abs(local_[static_cast<Eigen::Index>(cell * grid_.block + local)]) * sup[local];
    }
    best = std::max(best, s);
  }
  return best;
}

int max_resolution(std::size_t n, std::size_t d) {
  int k = 0;
  while (static_cast<std::size_t>(k + 1) * (d + 1) < 63 &&
         (std::uint64_t{1} << (static_cast<std::size_t>(k + 1) * (d + 1))) <= n) {
    ++k;
  }
  return k;
}

ModelCollection build_collection(std::size_t n, std::size_t d, SieveFamily family, std::vector<int> l,
                                 double clip) {
  require(n >= 2, ErrorCode::kInvalidArgument, "collection needs n >= 2");
  if (family == SieveFamily::kHaar) l.assign(d + 1, 1);
  require(l.size() == d + 1, ErrorCode::kInvalidArgument, "collection degree vector must have d+1 entries");
  const int top = max_resolution(n, d);
  ModelCollection out;
  out.n = n;
  std::vector<int> m(d + 1, 0);
  while (true) {
    SieveSpec spec{family, d, m, l, clip};
    validate(spec, std::numeric_limits<std::size_t>::max());
    out.specs.push_back(spec);
    std::size_t a = d + 1;
    bool done = true;
    while (a > 0) {
      --a;
      if (++m[a] <= top) {
        done = false;
        break;
      }
      m[a] = 0;
    }
    if (done) break;
  }
  return out;
}

double linf_index_bound(const SieveSpec& spec) {
  if (spec.family == SieveFamily::kHaar) return 1.0;
  double prod = 1.0;
  for (int li : spec.l) prod *= (li + 1.0) * (2.0 * li + 1.0);
  return std::sqrt(prod);
}

Eigen::VectorXd l2_project(const SieveSpec& spec, const PointFunction& f, int quad_nodes) {
  validate(spec);
  const CellGrid grid(spec);
  int max_degree = 0;
  for (int deg : grid.degree) max_degree = std::max(max_degree, deg);
  require(quad_nodes >= max_degree + 1, ErrorCode::kInvalidArgument,
          "quad_nodes must be at least max cell degree + 1 = " + std::to_string(max_degree + 1));
  const GaussLegendre& rule = gauss_legendre(quad_nodes);
  const std::size_t axes = grid.axes();
  const auto q = static_cast<std::size_t>(quad_nodes);

  // Legendre values at the reference nodes, shared by every cell.
  std::vector<std::vector<double>> legendre(axes);
  for (std::size_t a = 0; a < axes; ++a) {
    const auto deg = static_cast<std::size_t>(grid.degree[a] + 1);
    legendre[a].resize(q * deg);
    for (std::size_t k = 0; k < q; ++k) shifted_legendre(grid.degree[a], rule.nodes[k], &legendre[a][k * deg]);
  }

  Eigen::VectorXd local = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  std::vector<double> point(axes);
  std::vector<std::size_t> cell_idx(axes);
  std::vector<std::size_t> node_idx(axes);
  for (std::size_t cell = 0; cell < grid.cells; ++cell) {
    std::size_t rest = cell;
    double volume = 1.0;
    for (std::size_t a = axes; a-- > 0;) {
      cell_idx[a] = rest % grid.cells_per_axis[a];
      rest /= grid.cells_per_axis[a];
      volume *= std::ldexp(1.0, -grid.m[a]);
    }
    // Orthonormal local functions carry 1/sqrt(volume); integration carries volume.
    const double scale = std::sqrt(volume);
    std::fill(node_idx.begin(), node_idx.end(), 0);
    while (true) {
      double w = scale;
      for (std::size_t a = 0; a < axes; ++a) {
        const double width = std::ldexp(1.0, -grid.m[a]);
        point[a] = (static_cast<double>(cell_idx[a]) + rule.nodes[node_idx[a]]) * width;
        w *= rule.weights[node_idx[a]];
      }
      const double fv = f(point) * w;
      for (std::size_t local_i = 0; local_i < grid.block; ++local_i) {
        std::size_t r = local_i;
        double basis = 1.0;
        for (std::size_t a = axes; a-- > 0;) {
          const auto deg = static_cast<std::size_t>(grid.degree[a] + 1);
          basis *= legendre[a][node_idx[a] * deg + r % deg];
          r /= deg;
        }
        local[static_cast<Eigen::Index>(cell * grid.block + local_i)] += fv * basis;
      }
      std::size_t a = axes;
      bool done = true;
      while (a > 0) {
        --a;
        if (++node_idx[a] < q) {
          done = false;
          break;
        }
        node_idx[a] = 0;
      }
      if (done) break;
    }
  }
  return spec_from_local(spec, local);
}

}  // namespace aalen
