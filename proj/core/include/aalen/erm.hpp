#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "aalen/model.hpp"
#include "aalen/sieves.hpp"

namespace aalen {

inline constexpr double kConditionLimit = 1e12;

// Per-record integrals int phi_p phi_q Y dt of the time-axis local Legendre
// functions at one resolution. They depend only on the at-risk processes, so
// they are shared by every spec with the same time resolution and by every
// covariate projection of the same records.
struct TimeMoments {
  int m = 0;
  int degree = 0;
  std::vector<std::size_t> offsets;  // record r owns entries [offsets[r], offsets[r+1])
  std::vector<std::uint32_t> cells;
  std::vector<double> values;        // (degree+1)^2 per entry, row-major
};

class TimeMomentCache {
 public:
  explicit TimeMomentCache(const Dataset& data, int nodes = kDefaultQuadNodes);

  // Valid for `data` and for any dataset sharing its events and at-risk processes.
  const TimeMoments& get(int m, int degree) const;
  std::size_t records() const { return records_; }
  const QuadratureCache& quadrature() const { return quadrature_; }

 private:
  std::vector<StepFunction> at_risk_;
  QuadratureCache quadrature_;
  std::size_t records_ = 0;
  int nodes_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<TimeMoments>> table_;
};

// G_{ll'} = (1/n) sum_i int psi_l psi_l'(t, X_i) Y^i(t) dt and
// c_l = (1/n) sum_i sum_events psi_l(s, X_i), in the spec basis.
struct GramSystem {
  Eigen::SparseMatrix<double> gram;
  Eigen::VectorXd moment;
};

GramSystem assemble_system(const Dataset& data, const SieveSpec& spec, int nodes = kDefaultQuadNodes);

struct ErmFit {
  SieveSpec spec;
  Eigen::VectorXd coefficients;  // spec basis
  double gram_condition = 0.0;
  double achieved_risk = 0.0;   // P_n of the clipped model
  double unclipped_risk = 0.0;  // P_n of the span minimizer
  double rho_certificate = 0.0;  // max(0, achieved - unclipped)
  double rho = 0.0;             // requested slack, reported against the certificate
  double ridge = 0.0;           // ridge actually used
  bool clipped = false;         // clipping changed some evaluation on the training data

  IntensityModel unclipped_model() const;
  // Clipped(SieveExpansion(spec, coefficients), 0, spec.clip).
  IntensityModel model() const;
  bool meets_rho() const { return rho_certificate <= rho; }
};

// rho-ERM over the clipped sieve: solve (G + ridge I) theta = c, retrying with
// ridge = 1e-10 trace(G) / D_m when ridge == 0 and cond(G) > 1e12, then clip to [0, clip].
ErmFit fit(const Dataset& data, const SieveSpec& spec, double ridge, double rho, int nodes = kDefaultQuadNodes,
           const TimeMomentCache* cache = nullptr);

struct AuditResult {
  int candidates = 0;
  // max over candidates of achieved_risk - risk(candidate) - rho_certificate
  double worst_slack = -std::numeric_limits<double>::infinity();
};

// Compares the fit with random members of A_m = {span, sup <= clip}.
AuditResult near_optimality_audit(const Dataset& data, const ErmFit& fit, int candidates, std::uint64_t seed,
                                  int nodes = kDefaultQuadNodes);

}  // namespace aalen
