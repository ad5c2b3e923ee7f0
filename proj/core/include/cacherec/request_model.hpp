#pragma once

// Domain types for the recommendation-driven request chain and the
// Markov-chain quantities built from them.
//
// A session starts with a direct request drawn from the popularity vector p0.
// After each request the user follows one of the N recommended items with
// probability a, or issues another direct request with probability 1 - a.
// With a row-stochastic recommendation matrix Y this yields the chain
//
//     P = a * Y + (1 - a) * 1 * p0^T
//
// whose stationary distribution solves pi^T (I - a Y) = (1 - a) p0^T.

#include <span>
#include <string>
#include <vector>

#include "cacherec/linalg.hpp"

namespace cacherec {

/// Default feasibility tolerance for recommendation matrices.
inline constexpr double kFeasibilityTol = 1e-6;

class Catalog {
 public:
  /// Ids "0" .. "K-1".
  explicit Catalog(Index size);
  explicit Catalog(std::vector<std::string> ids);

  Index size() const noexcept { return static_cast<Index>(ids_.size()); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(Index i) const { return ids_.at(static_cast<std::size_t>(i)); }

 private:
  std::vector<std::string> ids_;
};

/// Pairwise relatedness u_ij in [0, 1] with a zero diagonal.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(Matrix values);

  Index size() const noexcept { return values_.rows(); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

class PopularityVector {
 public:
  /// Requires nonnegative entries summing to 1 within 1e-12.
  explicit PopularityVector(Vector values);
  /// Scales nonnegative weights to unit mass.
  static PopularityVector normalized(const Vector& weights);

  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  const Vector& values() const noexcept { return values_; }

 private:
  Vector values_;
};

class CostVector {
 public:
  explicit CostVector(Vector values);
  /// 0 for cached contents, 1 for everything else.
  static CostVector cache_indicator(Index size, std::span<const Index> cached);

  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  const Vector& values() const noexcept { return values_; }

 private:
  Vector values_;
};

struct RecViolation {
  enum class Kind { kBox, kRowSum, kDiagonal, kNonFinite };
  Kind kind;
  Index row;
  Index column;  // -1 for row-level violations
  double magnitude;

  std::string describe() const;
};

/// Candidate check of the recommendation-matrix invariants: entries in
/// [0, 1/N], unit row sums and a zero diagonal, each within `tol`.
std::vector<RecViolation> validate_rec_matrix(const Matrix& y, int list_size,
                                              double tol = kFeasibilityTol);

/// Row-stochastic recommendation matrix Y with y_ij in [0, 1/N] and zero
/// diagonal. Entry y_ij equals z_ij / N where z_ij is the probability that
/// j appears in the N-item list shown after i.
class RecMatrix {
 public:
  /// Throws InvalidArgument listing the first violations when `values` is
  /// not feasible within `tol`.
  RecMatrix(Matrix values, int list_size, double tol = kFeasibilityTol);

  Index size() const noexcept { return values_.rows(); }
  int list_size() const noexcept { return list_size_; }
  double tolerance() const noexcept { return tol_; }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
  int list_size_;
  double tol_;
};

class RequestModel {
 public:
  /// Rejects follow_prob outside [0, 1) and list sizes outside [1, K).
  /// Zero popularity entries are accepted with a warning.
  RequestModel(PopularityVector popularity, double follow_prob, int list_size);

  Index size() const noexcept { return popularity_.size(); }
  const PopularityVector& popularity() const noexcept { return popularity_; }
  double follow_prob() const noexcept { return follow_prob_; }
  int list_size() const noexcept { return list_size_; }

 private:
  PopularityVector popularity_;
  double follow_prob_;
  int list_size_;
};

class StationaryVector {
 public:
  explicit StationaryVector(Vector values);

  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  const Vector& values() const noexcept { return values_; }

 private:
  Vector values_;
};

/// P = a Y + (1 - a) 1 p0^T.
Matrix build_transition(const RecMatrix& y, const RequestModel& model);

/// Solves pi^T (I - a Y) = (1 - a) p0^T by LU factorization of (I - a Y)^T.
/// Throws SingularSystemError if the factorization fails.
StationaryVector stationary_direct(const RecMatrix& y, const RequestModel& model);

/// Power iteration pi^T <- pi^T P from the uniform vector until the L1 change
/// drops to `tol`. Throws ConvergenceError after `max_iter` steps.
StationaryVector stationary_power(const Matrix& transition, double tol, int max_iter);

/// max_j |pi^T - pi^T P|_j for P built from (y, model).
double stationarity_residual(const Vector& pi, const RecMatrix& y, const RequestModel& model);

/// Long-run average cost per request, pi^T x.
double expected_cost(const StationaryVector& pi, const CostVector& cost);

/// sum_{m=0}^{M} p0^T P^m x, accumulated with vector-matrix products.
double finite_horizon_cost(const RecMatrix& y, const RequestModel& model, const CostVector& cost,
                           int horizon);

/// Long-run fraction of requests served from `cached`, i.e. 1 - pi^T x for
/// the cache indicator cost.
double cache_hit_ratio(const RecMatrix& y, const RequestModel& model,
                       std::span<const Index> cached);

/// Per-row recommendation quality sum_j y_ij u_ij.
Vector quality_of(const RecMatrix& y, const SimilarityMatrix& u);

}  // namespace cacherec
