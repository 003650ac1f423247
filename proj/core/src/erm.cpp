#include "aalen/erm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "aalen/error.hpp"
#include "aalen/risk.hpp"
#include "aalen/rng.hpp"

namespace aalen {
namespace {

std::string describe(const SieveSpec& spec) {
  std::string s = spec.family == SieveFamily::kHaar ? "haar m=(" : "pp m=(";
  for (std::size_t i = 0; i < spec.m.size(); ++i) s += (i ? "," : "") + std::to_string(spec.m[i]);
  return s + ")";
}

std::unique_ptr<TimeMoments> build_moments(const std::vector<StepFunction>& at_risk, int m, int degree, int nodes) {
  auto out = std::make_unique<TimeMoments>();
  out->m = m;
  out->degree = degree;
  const auto deg = static_cast<std::size_t>(degree + 1);
  const GaussLegendre& rule = gauss_legendre(std::max(nodes, degree + 1));
  const double scale = std::ldexp(1.0, m);
  const std::size_t cells = std::size_t{1} << m;
  std::vector<double> acc(cells * deg * deg);
  std::vector<char> touched(cells);
  double vals[32];
  out->offsets.push_back(0);
  for (const auto& y : at_risk) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(touched.begin(), touched.end(), 0);
    for (const auto& piece : y.pieces()) {
      if (piece.value == 0.0) continue;
      double lo = piece.interval.start;
      const double hi_piece = piece.interval.end;
      while (lo < hi_piece) {
        const std::size_t j = dyadic_cell(lo, m);
        const double cell_end = static_cast<double>(j + 1) / scale;
        const double hi = std::min(hi_piece, cell_end);
        const double width = hi - lo;
        double* a = &acc[j * deg * deg];
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
          const double t = lo + width * rule.nodes[k];
          shifted_legendre(degree, t * scale - static_cast<double>(j), vals);
          const double w = rule.weights[k] * width * piece.value * scale;
          for (std::size_t p = 0; p < deg; ++p) {
            for (std::size_t q = 0; q < deg; ++q) a[p * deg + q] += w * vals[p] * vals[q];
          }
        }
        touched[j] = 1;
        lo = hi;
        if (j + 1 >= cells) break;
      }
    }
    for (std::size_t j = 0; j < cells; ++j) {
      if (!touched[j]) continue;
      out->cells.push_back(static_cast<std::uint32_t>(j));
      out->values.insert(out->values.end(), acc.begin() + static_cast<std::ptrdiff_t>(j * deg * deg),
                         acc.begin() + static_cast<std::ptrdiff_t>((j + 1) * deg * deg));
    }
    out->offsets.push_back(out->cells.size());
  }
  return out;
}

// Block-diagonal system in the cell-local basis.
struct LocalSystem {
  CellGrid grid;
  std::vector<double> blocks;  // cells * block^2
  Eigen::VectorXd moment;
};

// Covariate cell (row-major over covariate axes) and the tensor of covariate
// local basis values at x, row-major over covariate local indices.
std::size_t covariate_weights(const CellGrid& grid, std::span<const double> x, std::vector<double>& weights) {
  weights.assign(1, 1.0);
  std::size_t cell = 0;
  double vals[32];
  std::vector<double> next;
  for (std::size_t a = 1; a < grid.axes(); ++a) {
    const double u = x[a - 1];
    const std::size_t j = dyadic_cell(u, grid.m[a]);
    cell = cell * grid.cells_per_axis[a] + j;
    const double scale = std::ldexp(1.0, grid.m[a]);
    shifted_legendre(grid.degree[a], u * scale - static_cast<double>(j), vals);
    const double norm = std::sqrt(scale);
    next.clear();
    for (double w : weights) {
      for (int p = 0; p <= grid.degree[a]; ++p) next.push_back(w * vals[p] * norm);
    }
    weights.swap(next);
  }
  return cell;
}

LocalSystem assemble_local(const Dataset& data, const SieveSpec& spec, const TimeMomentCache& cache) {
  require(!data.empty(), ErrorCode::kEmptyDataset, "cannot assemble a Gram system without records");
  require(data.d() == spec.d, ErrorCode::kDimensionMismatch, "sieve dimension differs from data d");
  require(cache.records() == data.size(), ErrorCode::kInvalidArgument, "moment cache built for another dataset");
  validate(spec);
  LocalSystem sys;
  sys.grid = CellGrid(spec);
  const CellGrid& g = sys.grid;
  const std::size_t block = g.block;
  const auto deg_t = static_cast<std::size_t>(g.degree[0] + 1);
  const std::size_t cov_block = block / deg_t;
  const std::size_t cov_cells = g.cells / g.cells_per_axis[0];
  sys.blocks.assign(g.cells * block * block, 0.0);
  sys.moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  const TimeMoments& tm = cache.get(spec.m[0], g.degree[0]);
  const double scale_t = std::ldexp(1.0, spec.m[0]);
  const double norm_t = std::sqrt(scale_t);
  std::vector<double> w;
  std::vector<double> outer(cov_block * cov_block);
  double vals[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    const PathRecord& rec = data[r];
    const std::size_t cov_cell = covariate_weights(g, rec.x, w);
    for (std::size_t a = 0; a < cov_block; ++a) {
      for (std::size_t b = 0; b < cov_block; ++b) outer[a * cov_block + b] = w[a] * w[b];
    }
    for (std::size_t e = tm.offsets[r]; e < tm.offsets[r + 1]; ++e) {
      const std::size_t cell = tm.cells[e] * cov_cells + cov_cell;
      const double* mt = &tm.values[e * deg_t * deg_t];
      double* blk = &sys.blocks[cell * block * block];
      for (std::size_t pt = 0; pt < deg_t; ++pt) {
        for (std::size_t qt = 0; qt < deg_t; ++qt) {
          const double m = mt[pt * deg_t + qt];
          for (std::size_t px = 0; px < cov_block; ++px) {
            double* row = blk + (pt * cov_block + px) * block + qt * cov_block;
            const double* o = &outer[px * cov_block];
            for (std::size_t qx = 0; qx < cov_block; ++qx) row[qx] += m * o[qx];
          }
        }
      }
    }
    for (double s : rec.events) {
      const std::size_t jt = dyadic_cell(s, spec.m[0]);
      shifted_legendre(g.degree[0], s * scale_t - static_cast<double>(jt), vals);
      const std::size_t base = (jt * cov_cells + cov_cell) * block;
      for (std::size_t pt = 0; pt < deg_t; ++pt) {
        for (std::size_t px = 0; px < cov_block; ++px) {
          sys.moment[static_cast<Eigen::Index>(base + pt * cov_block + px)] += vals[pt] * norm_t * w[px];
        }
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& v : sys.blocks) v *= inv_n;
  sys.moment *= inv_n;
  return sys;
}

using BlockMatrix = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

TimeMomentCache::TimeMomentCache(const Dataset& data, int nodes)
    : quadrature_(data), records_(data.size()), nodes_(nodes) {
  at_risk_.reserve(data.size());
  for (const auto& r : data.records()) at_risk_.push_back(r.at_risk);
}

const TimeMoments& TimeMomentCache::get(int m, int degree) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = table_[{m, degree}];
  if (!slot) slot = build_moments(at_risk_, m, degree, nodes_);
  return *slot;
}

GramSystem assemble_system(const Dataset& data, const SieveSpec& spec, int nodes) {
  const TimeMomentCache cache(data, nodes);
  const LocalSystem sys = assemble_local(data, spec, cache);
  const std::size_t block = sys.grid.block;
  const auto dim = static_cast<Eigen::Index>(sys.grid.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t cell = 0; cell < sys.grid.cells; ++cell) {
    const double* blk = &sys.blocks[cell * block * block];
    for (std::size_t p = 0; p < block; ++p) {
      for (std::size_t q = 0; q < block; ++q) {
        // Each entry is accumulated once; mirror the upper triangle for exact symmetry.
        const double v = p <= q ? blk[p * block + q] : blk[q * block + p];
        if (v != 0.0) {
          triplets.emplace_back(static_cast<Eigen::Index>(cell * block + p), static_cast<Eigen::Index>(cell * block + q),
                                v);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> local(dim, dim);
  local.setFromTriplets(triplets.begin(), triplets.end());
  GramSystem out;
  if (spec.family == SieveFamily::kPiecewisePoly) {
    out.gram = std::move(local);
    out.moment = sys.moment;
    return out;
  }
  const Eigen::SparseMatrix<double> q = change_of_basis(spec);
  const Eigen::SparseMatrix<double> qt = q.transpose();
  Eigen::SparseMatrix<double> g = qt * local * q;
  // Symmetrize exactly.
  Eigen::SparseMatrix<double> gt = g.transpose();
  out.gram = 0.5 * (g + gt);
  out.gram.prune(0.0);
  out.moment = spec_from_local(spec, sys.moment);
  return out;
}

IntensityModel ErmFit::unclipped_model() const { return IntensityModel::sieve(spec, coefficients); }

IntensityModel ErmFit::model() const { return IntensityModel::clipped(unclipped_model(), 0.0, spec.clip); }

ErmFit fit(const Dataset& data, const SieveSpec& spec, double ridge, double rho, int nodes,
           const TimeMomentCache* cache) {
  require(ridge >= 0.0 && std::isfinite(ridge), ErrorCode::kInvalidArgument, "ridge must be >= 0");
  require(rho > 0.0, ErrorCode::kInvalidArgument, "rho must be > 0");
  std::unique_ptr<TimeMomentCache> own;
  if (cache == nullptr) {
    own = std::make_unique<TimeMomentCache>(data, nodes);
    cache = own.get();
  }
  const LocalSystem sys = assemble_local(data, spec, *cache);
  const std::size_t block = sys.grid.block;
  const auto b = static_cast<Eigen::Index>(block);

  double lambda_max = 0.0;
  double lambda_min = std::numeric_limits<double>::infinity();
  double trace = 0.0;
  for (std::size_t cell = 0; cell < sys.grid.cells; ++cell) {
    const BlockMatrix blk(&sys.blocks[cell * block * block], b, b);
    trace += blk.trace();
    if (block == 1) {
      lambda_max = std::max(lambda_max, blk(0, 0));
      lambda_min = std::min(lambda_min, blk(0, 0));
      continue;
    }
    Eigen::MatrixXd sym = blk.selfadjointView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    lambda_max = std::max(lambda_max, eig.eigenvalues().maxCoeff());
    lambda_min = std::min(lambda_min, eig.eigenvalues().minCoeff());
  }
  ErmFit out;
  out.spec = spec;
  out.rho = rho;
  out.gram_condition = lambda_min > 0.0 ? lambda_max / lambda_min : std::numeric_limits<double>::infinity();
  out.ridge = ridge;
  if (ridge == 0.0 && !(out.gram_condition <= kConditionLimit)) {
    out.ridge = 1e-10 * trace / static_cast<double>(sys.grid.size());
  }
  if (!(out.ridge > 0.0) && !(out.gram_condition <= kConditionLimit)) {
    fail(ErrorCode::kSingularSystem, "Gram system is singular for " + describe(spec));
  }

  Eigen::VectorXd local(static_cast<Eigen::Index>(sys.grid.size()));
  for (std::size_t cell = 0; cell < sys.grid.cells; ++cell) {
    const BlockMatrix blk(&sys.blocks[cell * block * block], b, b);
    Eigen::MatrixXd a = blk.selfadjointView<Eigen::Upper>();
    a.diagonal().array() += out.ridge;
    const Eigen::VectorXd rhs = sys.moment.segment(static_cast<Eigen::Index>(cell * block), b);
    Eigen::VectorXd x;
    if (block == 1) {
      x = rhs / a(0, 0);
    } else {
      x = a.ldlt().solve(rhs);
    }
    local.segment(static_cast<Eigen::Index>(cell * block), b) = x;
  }
  for (double v : local) {
    if (!std::isfinite(v)) fail(ErrorCode::kSingularSystem, "non-finite solution for " + describe(spec));
  }

  // Quadratic form of the unclipped risk: theta' G theta - 2 theta' c (basis change is orthogonal).
  double quad = 0.0;
  for (std::size_t cell = 0; cell < sys.grid.cells; ++cell) {
    const BlockMatrix blk(&sys.blocks[cell * block * block], b, b);
    const auto seg = local.segment(static_cast<Eigen::Index>(cell * block), b);
    quad += seg.dot(blk.selfadjointView<Eigen::Upper>() * seg);
  }
  out.unclipped_risk = quad - 2.0 * local.dot(sys.moment);
  out.coefficients = spec_from_local(spec, local);

  // Risk of the clipped model, tracking whether the clamp was ever active.
  const IntensityModel unclipped = out.unclipped_model();
  const double lo = 0.0;
  const double hi = spec.clip;
  double total = 0.0;
  bool clamped = false;
  const DatasetQuadrature& q =
      cache->quadrature().get(unclipped.time_breakpoints(), std::max(nodes, spec.cell_degree(0) + 1));
  std::vector<double> vals;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PathRecord& r = data.records()[i];
    const auto s = unclipped.slice(r.x);
    const auto ts = q.times(i);
    const auto ws = q.weights(i);
    vals.resize(ts.size() + r.events.size());
    const std::span<double> at_nodes(vals.data(), ts.size());
    const std::span<double> at_events(vals.data() + ts.size(), r.events.size());
    s->evaluate(ts, at_nodes);
    s->evaluate(r.events, at_events);
    for (double& v : vals) {
      const double c = std::clamp(v, lo, hi);
      clamped = clamped || c != v;
      v = c;
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) sq += ws[k] * at_nodes[k] * at_nodes[k];
    double ev = 0.0;
    for (double v : at_events) ev += v;
    total += sq - 2.0 * ev;
  }
  out.achieved_risk = total / static_cast<double>(data.size());
  out.clipped = clamped;
  out.rho_certificate = clamped ? std::max(0.0, out.achieved_risk - out.unclipped_risk) : 0.0;
  return out;
}

AuditResult near_optimality_audit(const Dataset& data, const ErmFit& fit, int candidates, std::uint64_t seed,
                                  int nodes) {
  AuditResult out;
  const auto dim = static_cast<Eigen::Index>(fit.spec.dimension());
  for (int k = 0; k < candidates; ++k) {
    Rng rng(seed, static_cast<std::uint64_t>(k));
    Eigen::VectorXd theta(dim);
    // Alternate pure noise with perturbations of the fitted coefficients.
    const double mix = (k % 2 == 0) ? 0.0 : rng.uniform();
    for (Eigen::Index i = 0; i < dim; ++i) theta[i] = mix * fit.coefficients[i] + rng.normal();
    const double sup = LocalExpansion(fit.spec, theta).sup_bound();
    if (sup > fit.spec.clip) theta *= fit.spec.clip / sup;
    const double risk = empirical_risk(data, IntensityModel::sieve(fit.spec, theta), nodes);
    out.worst_slack = std::max(out.worst_slack, fit.achieved_risk - risk - fit.rho_certificate);
    ++out.candidates;
  }
  return out;
}

}  // namespace aalen
