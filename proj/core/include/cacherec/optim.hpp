#pragma once

// Cache-aware recommendation policies.
//
//  * Myopic: minimizes the cost of the single next request,
//    p0' (a Y + (1 - a) 1 p0') x, a linear program that splits into one
//    independent problem per row of Y.
//
//  * CARS: minimizes the long-run cost pi' x. The stationary vector pi is
//    promoted to a variable tied to Y by the residual
//        c(pi, Y) = pi' - pi' (a Y + (1 - a) 1 p0'),
//    which is relaxed into the augmented Lagrangian
//        f(pi, Y) = pi' x + lambda' c + rho/2 |c|^2.
//    f is convex in pi for fixed Y and in Y for fixed pi; the solver
//    alternates the two minimizations and updates lambda after each sweep.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cacherec/linalg.hpp"
#include "cacherec/qp.hpp"
#include "cacherec/request_model.hpp"

namespace cacherec {

/// Problem data shared by both policies. Construction checks that every row
/// can reach its quality threshold.
class OptimInputs {
 public:
  OptimInputs(SimilarityMatrix similarity, RequestModel model, CostVector cost, Vector quality);
  /// Uniform threshold q for every row.
  OptimInputs(SimilarityMatrix similarity, RequestModel model, CostVector cost, double quality);

  Index size() const noexcept { return model_.size(); }
  const SimilarityMatrix& similarity() const noexcept { return similarity_; }
  const RequestModel& model() const noexcept { return model_; }
  const CostVector& cost() const noexcept { return cost_; }
  const Vector& quality() const noexcept { return quality_; }

 private:
  void validate() const;

  SimilarityMatrix similarity_;
  RequestModel model_;
  CostVector cost_;
  Vector quality_;
};

/// Row-wise exact LP solution of the single-step problem. `threads` > 1
/// spreads rows over worker threads; the result does not depend on it.
RecMatrix myopic_solve(const OptimInputs& in, int threads = 1);

/// Objective of the single-step problem, p0' (a Y + (1 - a) 1 p0') x.
double myopic_objective(const Matrix& y, const OptimInputs& in);

/// Per row: 1/N on the N most similar items (lowest index on ties).
RecMatrix top_similarity_rec(const SimilarityMatrix& u, int list_size);

enum class MultiplierStep {
  kHalfRho,  // lambda += rho/2 * c
  kRho,      // lambda += rho * c, textbook method of multipliers
};

enum class LambdaInit {
  kZero,  // lambda0 = 0
  kBias,  // lambda0 = -h(Y0), the relative-cost vector of the initial chain
};

struct SubproblemSettings {
  double tol = 1e-7;
  int max_iter = 50000;
};

struct CarsConfig {
  double rho = 1.0;
  std::optional<Vector> lambda0;     // overrides lambda_init
  LambdaInit lambda_init = LambdaInit::kZero;
  std::optional<RecMatrix> y0;       // defaults to top_similarity_rec
  double acc1 = 1e-6;                // bound on |c|^2
  double acc2 = 1e-5;                // bound on successive cost change
  int max_iter = 30;
  MultiplierStep multiplier_step = MultiplierStep::kHalfRho;
  SubproblemSettings pi_step{};
  SubproblemSettings y_step{1e-7, 2000};

  void validate() const;
};

struct CarsIterate {
  int iteration = 0;          // 0 is the initial matrix
  double actual_cost = 0.0;   // pi(Y_i)' x with the exact stationary vector
  double virtual_cost = 0.0;  // pi_i' x with the auxiliary vector (NaN at 0)
  double residual_sq = 0.0;   // |c(pi_i, Y_i)|^2 (NaN at 0)
  double lambda_norm = 0.0;
};

struct CarsResult {
  RecMatrix best_y;
  double best_cost = 0.0;
  int best_index = 0;
  std::vector<double> cost_trace;      // actual cost per iteration, entry 0 = Y0
  std::vector<double> residual_trace;  // |c|^2 per iteration, entry 0 = NaN
  std::vector<CarsIterate> iterates;
  int iterations = 0;
  bool converged = false;
  std::string failure;  // set when a subproblem aborted the run
};

/// c(pi, Y) = pi - (a Y' pi + (1 - a) (sum pi) p0).
Vector residual_c(const Vector& pi, const Matrix& y, const RequestModel& model);

/// pi' x + lambda' c + rho/2 |c|^2.
double augmented_lagrangian(const Vector& pi, const Matrix& y, const Vector& lambda, double rho,
                            const OptimInputs& in);

/// Multipliers that make pi(Y) a minimizer of the pi-step for any rho:
/// lambda = -h with (I - P) h = x - (pi' x) 1 and pi' h = 0.
Vector bias_multipliers(const RecMatrix& y, const OptimInputs& in);

/// argmin over the simplex of f(., Y).
StationaryVector cars_pi_step(const RecMatrix& y, const Vector& lambda, double rho,
                              const OptimInputs& in, const SubproblemSettings& settings = {},
                              const std::optional<Vector>& warm_start = std::nullopt,
                              QpSolution* diagnostics = nullptr);

/// argmin over feasible recommendation matrices of f(pi, .).
RecMatrix cars_y_step(const Vector& pi, const Vector& lambda, double rho, const OptimInputs& in,
                      const SubproblemSettings& settings = {1e-7, 2000},
                      const std::optional<RecMatrix>& warm_start = std::nullopt,
                      QpSolution* diagnostics = nullptr);

/// The alternating loop. Keeps the iterate with the lowest actual cost.
CarsResult cars_solve(const OptimInputs& in, const CarsConfig& cfg);

/// Index of the smallest entry, earliest on ties.
std::size_t select_best(const std::vector<double>& cost_trace);

/// CSV with columns iter,actual_cost,virtual_cost,residual_sq,lambda_norm.
void write_cars_trace(std::ostream& out, const CarsResult& result);

}  // namespace cacherec
