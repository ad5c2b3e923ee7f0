#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "cacherec/error.hpp"
#include "cacherec/matrix_io.hpp"
#include "cacherec/optim.hpp"

namespace cacherec {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using ConstMap = Eigen::Map<const Vector>;
using MutMap = Eigen::Map<Vector>;
using ConstMatMap = Eigen::Map<const Matrix>;
using MatMap = Eigen::Map<Matrix>;

}  // namespace

void CarsConfig::validate() const {
  if (!(rho > 0.0)) throw InvalidArgument("CARS: rho must be positive");
  if (!(acc1 > 0.0) || !(acc2 > 0.0)) throw InvalidArgument("CARS: accuracies must be positive");
  if (max_iter < 1) throw InvalidArgument("CARS: maxIter must be >= 1");
}

Vector residual_c(const Vector& pi, const Matrix& y, const RequestModel& model) {
  if (pi.size() != y.rows() || y.rows() != model.size()) {
    throw DimensionError("residual_c: size mismatch");
  }
  const double a = model.follow_prob();
  // pi' P0 = (sum pi) p0' keeps this O(K^2).
  return pi - a * (y.transpose() * pi) - (1.0 - a) * pi.sum() * model.popularity().values();
}

double augmented_lagrangian(const Vector& pi, const Matrix& y, const Vector& lambda, double rho,
                            const OptimInputs& in) {
  if (lambda.size() != pi.size()) throw DimensionError("augmented_lagrangian: lambda size");
  const Vector c = residual_c(pi, y, in.model());
  return pi.dot(in.cost().values()) + c.dot(lambda) + 0.5 * rho * c.squaredNorm();
}

Vector bias_multipliers(const RecMatrix& y, const OptimInputs& in) {
  const Index k = in.size();
  if (y.size() != k) throw DimensionError("bias_multipliers: size mismatch");
  const Vector pi = stationary_direct(y, in.model()).values();
  const Vector& x = in.cost().values();
  // I - P + 1 pi' is nonsingular for an irreducible chain.
  Matrix m = -build_transition(y, in.model());
  m.diagonal().array() += 1.0;
  m += Vector::Ones(k) * pi.transpose();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Vector rhs = x - pi.dot(x) * Vector::Ones(k);
  Vector h = lu.solve(rhs);
  h += lu.solve(rhs - m * h);
  return -h;
}

StationaryVector cars_pi_step(const RecMatrix& y, const Vector& lambda, double rho,
                              const OptimInputs& in, const SubproblemSettings& settings,
                              const std::optional<Vector>& warm_start, QpSolution* diagnostics) {
  const Index k = in.size();
  if (y.size() != k || lambda.size() != k) throw DimensionError("cars_pi_step: size mismatch");
  const double a = in.model().follow_prob();
  const Vector& p0 = in.model().popularity().values();
  const Matrix& ym = y.values();

  // c = B pi with B = I - a Y' - (1 - a) p0 1'.
  auto apply_b = [&](const ConstMap& v, Vector& out) {
    out.noalias() = v - a * (ym.transpose() * v);
    out -= ((1.0 - a) * v.sum()) * p0;
  };
  auto apply_bt = [&](const ConstMap& r, Vector& out) {
    out.noalias() = r - a * (ym * r);
    out.array() -= (1.0 - a) * p0.dot(r);
  };

  QpProblem qp;
  qp.dimension = k;
  if (rho > 0.0) {
    qp.quadratic_op = [&, rho](std::span<const double> in_v, std::span<double> out_v) {
      const ConstMap v(in_v.data(), k);
      Vector bv(k);
      apply_b(v, bv);
      Vector btbv(k);
      apply_bt(ConstMap(bv.data(), k), btbv);
      MutMap(out_v.data(), k) = rho * btbv;
    };
  }
  Vector bt_lambda(k);
  apply_bt(ConstMap(lambda.data(), k), bt_lambda);
  qp.linear = in.cost().values() + bt_lambda;
  qp.lower = Vector::Zero(k);
  qp.blocks.push_back(CoordinateBlock{0, k, 1.0, {}, 0.0});

  QpOptions opt;
  opt.tol = settings.tol;
  opt.max_iter = settings.max_iter;
  if (warm_start) opt.warm_start = *warm_start;
  QpSolution sol = solve_qp(qp, opt);
  if (sol.status == QpStatus::kInfeasible) throw InfeasibleError("pi-step reported infeasible");
  Vector pi = sol.point;
  if (diagnostics) *diagnostics = std::move(sol);
  return StationaryVector(std::move(pi));
}

RecMatrix cars_y_step(const Vector& pi, const Vector& lambda, double rho, const OptimInputs& in,
                      const SubproblemSettings& settings, const std::optional<RecMatrix>& warm_start,
                      QpSolution* diagnostics) {
  const Index k = in.size();
  if (pi.size() != k || lambda.size() != k) throw DimensionError("cars_y_step: size mismatch");
  const int n = in.model().list_size();
  const double a = in.model().follow_prob();
  const Vector& p0 = in.model().popularity().values();

  // With w = Y' pi the residual is c = d - a w, d = pi - (1 - a)(sum pi) p0,
  // so f(pi, .) = -a lambda' w + rho/2 |d - a w|^2 + const. The Hessian
  // a^2 rho (pi pi' kron I) couples entries column-wise.
  const Vector d = pi - (1.0 - a) * pi.sum() * p0;
  const Vector column_price = -a * (lambda + rho * d);

  QpProblem qp;
  qp.dimension = k * k;
  const double curvature = a * a * rho;
  if (curvature > 0.0) {
    qp.quadratic_op = [&pi, k, curvature](std::span<const double> in_v, std::span<double> out_v) {
      const ConstMatMap v(in_v.data(), k, k);
      const Vector w = v.transpose() * pi;
      MatMap(out_v.data(), k, k).noalias() = (curvature * pi) * w.transpose();
    };
  }
  Vector linear(k * k);
  MatMap(linear.data(), k, k).noalias() = pi * column_price.transpose();
  qp.linear = std::move(linear);
  qp.lower = Vector::Zero(k * k);
  qp.upper = Vector::Constant(k * k, 1.0 / n);
  qp.blocks.reserve(static_cast<std::size_t>(k));
  const Matrix& u = in.similarity().values();
  for (Index i = 0; i < k; ++i) {
    qp.upper[i * k + i] = 0.0;
    CoordinateBlock block{i * k, k, 1.0, {}, 0.0};
    if (in.quality()[i] > 0.0) {
      block.coeffs = u.row(i).transpose();
      block.threshold = in.quality()[i];
    }
    qp.blocks.push_back(std::move(block));
  }

  QpOptions opt;
  opt.tol = settings.tol;
  opt.max_iter = settings.max_iter;
  // Row i's gradient scales with pi_i, and pi pi' <= (sum pi) diag(pi), so a
  // row-constant metric pi_i makes the scaled Hessian a multiple of a
  // projector.
  const double floor = 1e-12 * std::max(pi.maxCoeff(), 1e-300);
  opt.metric.resize(k * k);
  for (Index i = 0; i < k; ++i) opt.metric.segment(i * k, k).setConstant(std::max(pi[i], floor));
  if (warm_start) {
    if (warm_start->size() != k) throw DimensionError("cars_y_step: warm start size");
    opt.warm_start = ConstMap(warm_start->values().data(), k * k);
  }
  QpSolution sol = solve_qp(qp, opt);
  if (sol.status == QpStatus::kInfeasible) throw InfeasibleError("Y-step reported infeasible");
  Matrix y = ConstMatMap(sol.point.data(), k, k);
  if (diagnostics) *diagnostics = std::move(sol);
  return RecMatrix(std::move(y), n);
}

std::size_t select_best(const std::vector<double>& cost_trace) {
  if (cost_trace.empty()) throw InvalidArgument("select_best: empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cost_trace.size(); ++i) {
    if (cost_trace[i] < cost_trace[best]) best = i;
  }
  return best;
}

CarsResult cars_solve(const OptimInputs& in, const CarsConfig& cfg) {
  cfg.validate();
  const Index k = in.size();
  const int n = in.model().list_size();
  RecMatrix y = cfg.y0 ? *cfg.y0 : top_similarity_rec(in.similarity(), n);
  if (y.size() != k || y.list_size() != n) {
    throw DimensionError("CARS: initial matrix does not match the inputs");
  }
  Vector lambda = cfg.lambda0                                ? *cfg.lambda0
                  : cfg.lambda_init == LambdaInit::kBias ? bias_multipliers(y, in)
                                                         : Vector::Zero(k);
  if (lambda.size() != k) throw DimensionError("CARS: lambda0 has the wrong length");
  const double step = cfg.multiplier_step == MultiplierStep::kHalfRho ? 0.5 * cfg.rho : cfg.rho;
  const CostVector& x = in.cost();

  StationaryVector exact = stationary_direct(y, in.model());
  double cost = expected_cost(exact, x);
  std::vector<double> costs{cost};
  std::vector<double> residuals{kNaN};
  std::vector<CarsIterate> iterates{{0, cost, kNaN, kNaN, lambda.norm()}};
  RecMatrix best_y = y;
  double best_cost = cost;
  std::optional<Vector> pi_warm = exact.values();
  bool converged = false;
  std::string failure;

  int it = 1;
  for (; it <= cfg.max_iter; ++it) {
    try {
      const StationaryVector pi = cars_pi_step(y, lambda, cfg.rho, in, cfg.pi_step, pi_warm);
      RecMatrix y_next = cars_y_step(pi.values(), lambda, cfg.rho, in, cfg.y_step, y);
      const Vector c = residual_c(pi.values(), y_next.values(), in.model());
      lambda += step * c;
      const double next_cost = expected_cost(stationary_direct(y_next, in.model()), x);
      const double eps1 = c.squaredNorm();
      const double eps2 = std::abs(next_cost - cost);
      costs.push_back(next_cost);
      residuals.push_back(eps1);
      iterates.push_back({it, next_cost, pi.values().dot(x.values()), eps1, lambda.norm()});
      if (next_cost < best_cost) {
        best_cost = next_cost;
        best_y = y_next;
      }
      cost = next_cost;
      y = std::move(y_next);
      pi_warm = pi.values();
      if (eps1 <= cfg.acc1 && eps2 <= cfg.acc2) {
        converged = true;
        break;
      }
    } catch (const Error& e) {
      failure = e.what();
      break;
    }
  }

  const std::size_t best = select_best(costs);
  CarsResult result{std::move(best_y), best_cost, static_cast<int>(best), std::move(costs),
                    std::move(residuals), std::move(iterates), 0, converged, std::move(failure)};
  result.iterations = static_cast<int>(result.cost_trace.size()) - 1;
  return result;
}

void write_cars_trace(std::ostream& out, const CarsResult& result) {
  out << "iter,actual_cost,virtual_cost,residual_sq,lambda_norm\n";
  for (const auto& it : result.iterates) {
    out << it.iteration << ',' << format_double(it.actual_cost) << ','
        << (std::isnan(it.virtual_cost) ? std::string() : format_double(it.virtual_cost)) << ','
        << (std::isnan(it.residual_sq) ? std::string() : format_double(it.residual_sq)) << ','
        << format_double(it.lambda_norm) << '\n';
  }
}

}  // namespace cacherec
