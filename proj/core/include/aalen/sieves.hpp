#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace aalen {

enum class SieveFamily { kPiecewisePoly, kHaar };

inline constexpr std::size_t kDefaultDimensionCap = 1'000'000;
inline constexpr std::size_t kMaxCovariates = 7;

// Tensor-product sieve on [0,1]^{d+1}; axis 0 is time, axes 1..d are covariates.
struct SieveSpec {
  SieveFamily family = SieveFamily::kPiecewisePoly;
  std::size_t d = 1;
  std::vector<int> m;  // dyadic resolution per axis
  std::vector<int> l;  // polynomial degree per axis (vanishing moments, fixed to 1, for Haar)
  double clip = 1.0;

  std::size_t axes() const { return d + 1; }
  // D_m: prod 2^{m_i}(l_i + 1) for piecewise polynomials, prod 2^{m_i} for Haar.
  std::size_t dimension() const;
  // Polynomial degree inside one dyadic cell (l_i for piecewise polynomials, 0 for Haar).
  int cell_degree(std::size_t axis) const;

  friend bool operator==(const SieveSpec&, const SieveSpec&) = default;
};

// Throws kInvalidArgument on malformed specs and kCapExceeded when D_m > cap.
void validate(const SieveSpec& spec, std::size_t cap = kDefaultDimensionCap);

// Orthonormal shifted Legendre polynomials on [0,1]: out[p] = sqrt(2p+1) P_p(2s-1), p <= degree.
void shifted_legendre(int degree, double s, double* out);

// Dyadic cell of u in [0,1] at resolution m; cells are [j 2^-m, (j+1) 2^-m) with the last one closed.
inline std::size_t dyadic_cell(double u, int m) {
  const std::size_t cells = std::size_t{1} << m;
  const auto j = static_cast<std::size_t>(u * static_cast<double>(cells));
  return j >= cells ? cells - 1 : j;
}

// Cell-major layout shared by the piecewise-polynomial basis and the local
// representation of every sieve: index = cell * block + local, both row-major
// over axes with time first.
struct CellGrid {
  std::vector<int> m;
  std::vector<int> degree;
  std::vector<std::size_t> cells_per_axis;
  std::size_t cells = 1;
  std::size_t block = 1;

  CellGrid() = default;
  explicit CellGrid(const SieveSpec& spec);
  std::size_t axes() const { return m.size(); }
  std::size_t size() const { return cells * block; }
};

struct AxisSupport {
  double lo = 0.0;
  double hi = 1.0;
};

// The spec basis {psi_lambda}, orthonormal in L2([0,1]^{d+1}).
class TensorBasis {
 public:
  explicit TensorBasis(SieveSpec spec, std::size_t cap = kDefaultDimensionCap);

  const SieveSpec& spec() const { return spec_; }
  std::size_t size() const { return size_; }

  // psi_index(point), point = (t, x_1, ..., x_d).
  double value(std::size_t index, std::span<const double> point) const;
  // Support rectangle; the function vanishes outside [lo, hi) per axis (closed at 1).
  std::vector<AxisSupport> support(std::size_t index) const;
  // Interior points of axis where psi_index is not smooth (ends of its pieces).
  std::vector<double> breakpoints(std::size_t index, std::size_t axis) const;
  // All (index, value) with nonzero value at point.
  void active(std::span<const double> point, std::vector<std::pair<std::size_t, double>>& out) const;

 private:
  std::vector<std::size_t> axis_indices(std::size_t index) const;

  SieveSpec spec_;
  CellGrid grid_;
  std::size_t size_ = 0;
};

TensorBasis basis_functions(const SieveSpec& spec, std::size_t cap = kDefaultDimensionCap);

// Orthogonal change of basis between spec coefficients and the cell-local
// representation: theta_local = Q theta_spec. Identity for piecewise polynomials.
Eigen::VectorXd local_from_spec(const SieveSpec& spec, const Eigen::VectorXd& spec_coefficients);
Eigen::VectorXd spec_from_local(const SieveSpec& spec, const Eigen::VectorXd& local_coefficients);
// Q as a sparse matrix (rows: local index, columns: spec index).
Eigen::SparseMatrix<double> change_of_basis(const SieveSpec& spec);

// A function of the sieve span stored as per-cell Legendre coefficients.
class LocalExpansion {
 public:
  LocalExpansion() = default;
  LocalExpansion(const SieveSpec& spec, const Eigen::VectorXd& spec_coefficients);

  const CellGrid& grid() const { return grid_; }
  const Eigen::VectorXd& local_coefficients() const { return local_; }

  double value(double t, std::span<const double> x) const;

  // Restriction to a fixed covariate: for each time cell j, coefficients c[j * (deg_t + 1) + p]
  // such that alpha(t, x) = sum_p c[...] L_p(2^{m_t} t - j).
  void time_slice(std::span<const double> x, std::vector<double>& out) const;
  // Same into caller storage of time_slice_size() entries.
  void time_slice(std::span<const double> x, std::span<double> out) const;
  std::size_t time_slice_size() const {
    return grid_.cells_per_axis[0] * static_cast<std::size_t>(grid_.degree[0] + 1);
  }

  // An upper bound of sup |alpha| from per-cell coefficient magnitudes.
  double sup_bound() const;

 private:
  CellGrid grid_;
  Eigen::VectorXd local_;
};

struct ModelCollection {
  std::vector<SieveSpec> specs;
  std::size_t n = 0;
};

// Every m with 2^{m_i} <= n^{1/(d+1)}, in lexicographic order.
ModelCollection build_collection(std::size_t n, std::size_t d, SieveFamily family,
                                 std::vector<int> l, double clip);

// Largest k with 2^{k (d+1)} <= n.
int max_resolution(std::size_t n, std::size_t d);

// L-infinity index bound of the span: sqrt(prod (l_i+1)(2 l_i+1)) for piecewise
// polynomials; 1 for Haar (attained by the orthonormal cell-indicator basis of the same span).
double linf_index_bound(const SieveSpec& spec);

using PointFunction = std::function<double(std::span<const double>)>;

// Lebesgue-L2 projection coefficients (spec basis) by tensor Gauss-Legendre on every cell.
Eigen::VectorXd l2_project(const SieveSpec& spec, const PointFunction& f, int quad_nodes);

}  // namespace aalen
