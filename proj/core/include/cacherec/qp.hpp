#pragma once

// Convex quadratic programs
//
//     minimize    1/2 v' Q v + c' v
//     subject to  A v = b,  G v >= h,  lower <= v <= upper,
//                 plus any number of coordinate blocks B_k with
//                 sum(v[B_k]) = s_k  and optionally  g_k . v[B_k] >= t_k.
//
// Two first-order engines sit behind solve_qp:
//
//  * Problems whose only constraints are the box and disjoint blocks are
//    solved by accelerated projected gradient (FISTA with adaptive restart).
//    Each block is projected exactly (see project_block), and Q is only ever
//    touched through matrix-vector products, so Q may be a closure over a
//    structured operator with millions of variables.
//
//  * Everything else, and linear programs with at most 256 variables, is
//    put in the form l <= A v <= u and solved by an
//    operator-splitting ADMM iteration with a dense factorization of
//    Q + sigma I + A' R A, followed by an active-set polishing step that
//    recovers exact vertex solutions of linear programs.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cacherec/linalg.hpp"
#include "cacherec/projection.hpp"

namespace cacherec {

/// out = Q * in. Must be safe to call concurrently on distinct buffers.
using LinearOperator = std::function<void(std::span<const double> in, std::span<double> out)>;

struct CoordinateBlock {
  Index offset = 0;
  Index length = 0;
  double total = 1.0;          // sum of the block's coordinates
  Vector coeffs;               // optional: coeffs . v[block] >= threshold
  double threshold = 0.0;
};

struct QpProblem {
  Index dimension = 0;
  std::optional<Matrix> quadratic;  // explicit symmetric PSD matrix, or
  LinearOperator quadratic_op;      // matvec closure (used when set)
  Vector linear;                    // c; empty means zero
  Matrix eq_matrix;                 // A
  Vector eq_rhs;                    // b
  Matrix ineq_matrix;               // G
  Vector ineq_rhs;                  // h
  Vector lower;                     // empty means -inf
  Vector upper;                     // empty means +inf
  std::vector<CoordinateBlock> blocks;

  /// Q * v, zero when the problem is linear.
  void apply_quadratic(std::span<const double> v, std::span<double> out) const;
  double objective(const Vector& v) const;
  bool has_quadratic() const noexcept { return quadratic.has_value() || bool(quadratic_op); }
  bool is_block_structured() const noexcept { return eq_matrix.rows() == 0 && ineq_matrix.rows() == 0; }
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

const char* to_string(QpStatus status);

struct QpSolution {
  Vector point;
  double objective = 0.0;
  double primal_residual = 0.0;   // max constraint violation
  double dual_residual = 0.0;     // stationarity
  double complementarity = 0.0;   // max |multiplier * slack|
  int iterations = 0;
  bool polished = false;
  QpStatus status = QpStatus::kMaxIter;
};

struct QpOptions {
  double tol = 1e-7;
  int max_iter = 50000;
  std::optional<Vector> warm_start;
  /// When set, receives "iteration,objective,primal_residual" CSV rows.
  std::ostream* trace = nullptr;
  /// Projected-gradient engine: residual check cadence.
  int check_every = 5;
  /// ADMM engine: refuse problems larger than this (dense factorization).
  Index dense_limit = 4000;
  /// Per-block multiplier hints carried across calls (projected engine).
  std::vector<BlockHint>* block_hints = nullptr;
  /// Projected engine: positive diagonal metric, constant within each block,
  /// so block projections are unchanged. Steps become M^-1 grad / L with L
  /// the top eigenvalue of M^-1/2 Q M^-1/2. Empty means identity.
  Vector metric;
};

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options);
QpSolution solve_qp(const QpProblem& problem, double tol = 1e-7, int max_iter = 50000);

/// Largest eigenvalue of the quadratic term by power iteration.
double estimate_quadratic_norm(const QpProblem& problem, int iterations = 50);

/// Smallest eigenvalue of an explicit symmetric matrix (for the PSD check).
double smallest_eigenvalue(const Matrix& q);

}  // namespace cacherec
