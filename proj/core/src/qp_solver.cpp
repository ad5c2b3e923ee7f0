#include "cacherec/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "cacherec/error.hpp"
#include "cacherec/matrix_io.hpp"

namespace cacherec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vector bound_or(const Vector& bound, Index n, double fill) {
  return bound.size() == 0 ? Vector::Constant(n, fill) : bound;
}

void validate(const QpProblem& p) {
  const Index n = p.dimension;
  if (n <= 0) throw DimensionError("QP dimension must be positive");
  auto check_len = [&](const Vector& v, const char* name) {
    if (v.size() != 0 && v.size() != n) {
      throw DimensionError(std::string("QP ") + name + " has length " + std::to_string(v.size()) +
                           ", expected " + std::to_string(n));
    }
  };
  check_len(p.linear, "linear term");
  check_len(p.lower, "lower bound");
  check_len(p.upper, "upper bound");
  if (p.quadratic && (p.quadratic->rows() != n || p.quadratic->cols() != n)) {
    throw DimensionError("QP quadratic term has the wrong shape");
  }
  if (p.eq_matrix.rows() > 0 && (p.eq_matrix.cols() != n || p.eq_rhs.size() != p.eq_matrix.rows())) {
    throw DimensionError("QP equality system has inconsistent shape");
  }
  if (p.ineq_matrix.rows() > 0 &&
      (p.ineq_matrix.cols() != n || p.ineq_rhs.size() != p.ineq_matrix.rows())) {
    throw DimensionError("QP inequality system has inconsistent shape");
  }
  std::vector<char> owned(static_cast<std::size_t>(n), 0);
  for (const auto& b : p.blocks) {
    if (b.offset < 0 || b.length <= 0 || b.offset + b.length > n) {
      throw DimensionError("QP block out of range");
    }
    if (b.coeffs.size() != 0 && b.coeffs.size() != b.length) {
      throw DimensionError("QP block coefficient length mismatch");
    }
    for (Index j = b.offset; j < b.offset + b.length; ++j) {
      if (owned[static_cast<std::size_t>(j)]++) throw DimensionError("QP blocks overlap");
    }
  }
  if (p.quadratic) {
    const Matrix& q = *p.quadratic;
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
      throw InvalidArgument("QP quadratic term is not symmetric");
    }
    if (n <= 2000 && smallest_eigenvalue(q) < -1e-8) {
      throw InvalidArgument("QP quadratic term is not positive semidefinite");
    }
  }
}

// ---------------------------------------------------------------------------
// Projected-gradient engine for box + block constraints.

class BlockProjector {
 public:
  BlockProjector(const QpProblem& p, std::vector<BlockHint>* hints)
      : p_(p),
        lower_(bound_or(p.lower, p.dimension, -kInf)),
        upper_(bound_or(p.upper, p.dimension, kInf)),
        in_block_(static_cast<std::size_t>(p.dimension), 0),
        hints_(hints) {
    for (const auto& b : p.blocks) {
      for (Index j = b.offset; j < b.offset + b.length; ++j) in_block_[static_cast<std::size_t>(j)] = 1;
    }
    if (hints_ == nullptr) {
      hints_ = &local_hints_;
    }
    hints_->resize(p.blocks.size());
  }

  void project(const Vector& in, Vector& out) {
    for (Index j = 0; j < in.size(); ++j) {
      if (!in_block_[static_cast<std::size_t>(j)]) out[j] = std::clamp(in[j], lower_[j], upper_[j]);
    }
    for (std::size_t k = 0; k < p_.blocks.size(); ++k) {
      const auto& b = p_.blocks[k];
      const auto off = static_cast<std::size_t>(b.offset);
      const auto len = static_cast<std::size_t>(b.length);
      project_block(as_span(in).subspan(off, len), as_span(lower_).subspan(off, len),
                    as_span(upper_).subspan(off, len), b.total, as_span(b.coeffs), b.threshold,
                    as_span(out).subspan(off, len), &(*hints_)[k]);
    }
  }

  double violation(const Vector& v) const {
    double worst = 0.0;
    for (Index j = 0; j < v.size(); ++j) {
      worst = std::max({worst, lower_[j] - v[j], v[j] - upper_[j]});
    }
    for (const auto& b : p_.blocks) {
      const auto seg = v.segment(b.offset, b.length);
      worst = std::max(worst, std::abs(seg.sum() - b.total));
      if (b.coeffs.size() > 0) worst = std::max(worst, b.threshold - b.coeffs.dot(seg));
    }
    return worst;
  }

 private:
  const QpProblem& p_;
  Vector lower_;
  Vector upper_;
  std::vector<char> in_block_;
  std::vector<BlockHint>* hints_;
  std::vector<BlockHint> local_hints_;
};

Vector checked_metric(const QpProblem& p, const Vector& metric) {
  const Index n = p.dimension;
  if (metric.size() == 0) return Vector::Ones(n);
  if (metric.size() != n) throw DimensionError("QP metric has the wrong length");
  if (!(metric.array() > 0.0).all() || !metric.allFinite()) {
    throw InvalidArgument("QP metric must be positive and finite");
  }
  for (const auto& b : p.blocks) {
    const auto seg = metric.segment(b.offset, b.length);
    if (seg.maxCoeff() != seg.minCoeff()) {
      throw InvalidArgument("QP metric must be constant within each block");
    }
  }
  return metric;
}

// Top eigenvalue of M^-1/2 Q M^-1/2 by power iteration.
double scaled_quadratic_norm(const QpProblem& p, const Vector& inv_sqrt_m, int iterations = 50) {
  if (!p.has_quadratic()) return 0.0;
  const Index n = p.dimension;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
  v.normalize();
  Vector scaled(n), w(n);
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    scaled = v.cwiseProduct(inv_sqrt_m);
    p.apply_quadratic(as_span(scaled), as_span(w));
    w = w.cwiseProduct(inv_sqrt_m);
    const double norm = w.norm();
    if (!(norm > 0.0)) return estimate;
    v = w / norm;
    const bool settled = it > 3 && std::abs(norm - estimate) <= 1e-6 * norm;
    estimate = norm;
    if (settled) break;
  }
  return estimate;
}

QpSolution solve_projected(const QpProblem& p, const QpOptions& opt) {
  const Index n = p.dimension;
  const Vector c = p.linear.size() ? p.linear : Vector::Zero(n);
  const Vector metric = checked_metric(p, opt.metric);
  const Vector inv_metric = metric.cwiseInverse();
  BlockProjector proj(p, opt.block_hints);
  QpSolution sol;

  Vector x(n);
  try {
    if (opt.warm_start) {
      if (opt.warm_start->size() != n) throw DimensionError("QP warm start has the wrong length");
      proj.project(*opt.warm_start, x);
    } else {
      proj.project(Vector::Zero(n), x);
    }
  } catch (const InfeasibleError&) {
    sol.point = Vector::Zero(n);
    sol.status = QpStatus::kInfeasible;
    return sol;
  }

  double lip = scaled_quadratic_norm(p, inv_metric.cwiseSqrt());
  if (!(lip > 1e-12)) {
    // Linear objective: a long projected step lands on a minimizing face.
    lip = 1e-6 * std::max(c.cwiseProduct(inv_metric).cwiseAbs().maxCoeff(), 1e-12);
  } else {
    lip *= 1.01;
  }

  Vector qx(n), qy(n), grad(n), x_new(n), y = x, x_prev = x, scratch(n), probe(n);
  auto objective_with = [&](const Vector& v, Vector& qv) {
    p.apply_quadratic(as_span(v), as_span(qv));
    return 0.5 * v.dot(qv) + c.dot(v);
  };
  double f_x = objective_with(x, qx);
  double momentum = 1.0;
  double residual = kInf;

  auto fixed_point_residual = [&](const Vector& v, const Vector& qv) {
    scratch = v - (qv + c).cwiseProduct(inv_metric) / lip;
    proj.project(scratch, probe);
    return (probe - v).cwiseAbs().maxCoeff();
  };

  int it = 0;
  for (it = 1; it <= opt.max_iter; ++it) {
    p.apply_quadratic(as_span(y), as_span(qy));
    grad = qy + c;
    scratch = y - grad.cwiseProduct(inv_metric) / lip;
    proj.project(scratch, x_new);
    Vector qx_new(n);
    const double f_new = objective_with(x_new, qx_new);

    if (f_new > f_x + 1e-14 * (1.0 + std::abs(f_x))) {
      if (momentum > 1.0) {
        momentum = 1.0;
        y = x;
      } else {
        lip *= 2.0;  // halve the step
      }
      continue;
    }

    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const bool restart = (y - x_new).cwiseProduct(metric).dot(x_new - x) > 0.0;
    x_prev = x;
    x = x_new;
    qx = qx_new;
    f_x = f_new;
    if (restart) {
      momentum = 1.0;
      y = x;
    } else {
      y = x + ((momentum - 1.0) / next_momentum) * (x - x_prev);
      momentum = next_momentum;
    }

    if (opt.trace) {
      *opt.trace << it << ',' << format_double(f_x) << ',' << format_double(proj.violation(x))
                 << '\n';
    }
    if (it % std::max(1, opt.check_every) == 0 || (x - x_prev).cwiseAbs().maxCoeff() == 0.0) {
      residual = fixed_point_residual(x, qx);
      if (residual <= opt.tol) break;
    }
  }
  if (it > opt.max_iter) {
    it = opt.max_iter;
    residual = fixed_point_residual(x, qx);
  }

  sol.point = std::move(x);
  sol.objective = f_x;
  sol.iterations = it;
  sol.primal_residual = proj.violation(sol.point);
  // Multipliers of the exact projection satisfy complementarity by
  // construction; stationarity is measured by the gradient mapping.
  sol.dual_residual = residual * lip * metric.maxCoeff();
  sol.complementarity = 0.0;
  sol.status = (residual <= opt.tol && sol.primal_residual <= opt.tol)
                   ? QpStatus::kOptimal
                   : QpStatus::kMaxIter;
  return sol;
}

// ---------------------------------------------------------------------------
// ADMM engine for general constraints: l <= A v <= u.

struct StackedConstraints {
  Matrix a;
  Vector l;
  Vector u;
};

StackedConstraints stack_constraints(const QpProblem& p) {
  const Index n = p.dimension;
  const Vector lower = bound_or(p.lower, n, -kInf);
  const Vector upper = bound_or(p.upper, n, kInf);
  Index rows = p.eq_matrix.rows() + p.ineq_matrix.rows();
  for (const auto& b : p.blocks) rows += b.coeffs.size() ? 2 : 1;
  std::vector<Index> boxed;
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lower[j]) || std::isfinite(upper[j])) boxed.push_back(j);
  }
  rows += static_cast<Index>(boxed.size());

  StackedConstraints s{Matrix::Zero(rows, n), Vector(rows), Vector(rows)};
  Index r = 0;
  for (Index i = 0; i < p.eq_matrix.rows(); ++i, ++r) {
    s.a.row(r) = p.eq_matrix.row(i);
    s.l[r] = s.u[r] = p.eq_rhs[i];
  }
  for (Index i = 0; i < p.ineq_matrix.rows(); ++i, ++r) {
    s.a.row(r) = p.ineq_matrix.row(i);
    s.l[r] = p.ineq_rhs[i];
    s.u[r] = kInf;
  }
  for (const auto& b : p.blocks) {
    s.a.row(r).segment(b.offset, b.length).setOnes();
    s.l[r] = s.u[r] = b.total;
    ++r;
    if (b.coeffs.size()) {
      s.a.row(r).segment(b.offset, b.length) = b.coeffs.transpose();
      s.l[r] = b.threshold;
      s.u[r] = kInf;
      ++r;
    }
  }
  for (Index j : boxed) {
    s.a(r, j) = 1.0;
    s.l[r] = lower[j];
    s.u[r] = upper[j];
    ++r;
  }
  return s;
}

Matrix materialize_quadratic(const QpProblem& p) {
  const Index n = p.dimension;
  if (p.quadratic && !p.quadratic_op) return *p.quadratic;
  Matrix q = Matrix::Zero(n, n);
  if (!p.has_quadratic()) return q;
  Vector e = Vector::Zero(n);
  Vector col(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    p.apply_quadratic(as_span(e), as_span(col));
    q.col(j) = col;
    e[j] = 0.0;
  }
  return 0.5 * (q + q.transpose());
}

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
};

Residuals kkt_residuals(const Matrix& q, const Vector& c, const StackedConstraints& s,
                        const Vector& x, const Vector& y) {
  Residuals r;
  const Vector ax = s.a * x;
  for (Index i = 0; i < ax.size(); ++i) {
    r.primal = std::max({r.primal, s.l[i] - ax[i], ax[i] - s.u[i]});
    double slack = 0.0;
    if (y[i] < 0.0) slack = std::isfinite(s.l[i]) ? ax[i] - s.l[i] : kInf;
    if (y[i] > 0.0) slack = std::isfinite(s.u[i]) ? s.u[i] - ax[i] : kInf;
    if (y[i] != 0.0) r.complementarity = std::max(r.complementarity, std::abs(y[i] * slack));
  }
  r.dual = (q * x + c + s.a.transpose() * y).cwiseAbs().maxCoeff();
  return r;
}

// Solves the equality-constrained QP on the guessed active set.
bool polish(const Matrix& q, const Vector& c, const StackedConstraints& s, const Vector& z,
            const Vector& y, double tol, Vector& x_out, Vector& y_out) {
  const Index n = q.rows();
  const Index m = s.a.rows();
  std::vector<Index> active;
  std::vector<double> rhs_active;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  for (Index i = 0; i < m; ++i) {
    const bool equality = s.l[i] == s.u[i];
    const bool lower_active = std::isfinite(s.l[i]) && z[i] - s.l[i] < -y[i];
    const bool upper_active = std::isfinite(s.u[i]) && s.u[i] - z[i] < y[i];
    if (equality) {
      active.push_back(i);
      rhs_active.push_back(s.l[i]);
      side.push_back(0);
    } else if (lower_active) {
      active.push_back(i);
      rhs_active.push_back(s.l[i]);
      side.push_back(-1);
    } else if (upper_active) {
      active.push_back(i);
      rhs_active.push_back(s.u[i]);
      side.push_back(1);
    }
  }
  const Index na = static_cast<Index>(active.size());
  const double delta = 1e-9;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) = q;
  for (Index k = 0; k < na; ++k) {
    kkt.block(n + k, 0, 1, n) = s.a.row(active[static_cast<std::size_t>(k)]);
    kkt.block(0, n + k, n, 1) = s.a.row(active[static_cast<std::size_t>(k)]).transpose();
  }
  Eigen::MatrixXd reg = kkt;
  reg.topLeftCorner(n, n).diagonal().array() += delta;
  reg.bottomRightCorner(na, na).diagonal().array() -= delta;
  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -c;
  for (Index k = 0; k < na; ++k) rhs[n + k] = rhs_active[static_cast<std::size_t>(k)];

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(reg);
  Eigen::VectorXd sol = lu.solve(rhs);
  for (int refine = 0; refine < 25; ++refine) {
    const Eigen::VectorXd err = rhs - kkt * sol;
    if (err.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
    sol += lu.solve(err);
  }
  if (!sol.allFinite()) return false;

  Vector x = sol.head(n);
  Vector yy = Vector::Zero(m);
  for (Index k = 0; k < na; ++k) {
    double mult = sol[n + k];
    const int sd = side[static_cast<std::size_t>(k)];
    if ((sd < 0 && mult > tol) || (sd > 0 && mult < -tol)) return false;
    if (sd < 0) mult = std::min(mult, 0.0);
    if (sd > 0) mult = std::max(mult, 0.0);
    yy[active[static_cast<std::size_t>(k)]] = mult;
  }
  const Residuals r = kkt_residuals(q, c, s, x, yy);
  if (r.primal > tol || r.dual > tol) return false;
  x_out = std::move(x);
  y_out = std::move(yy);
  return true;
}

constexpr Index kSmallLinearProgram = 256;

QpSolution solve_admm(const QpProblem& p, const QpOptions& opt) {
  const Index n = p.dimension;
  if (n > opt.dense_limit) {
    throw InvalidArgument("QP with general constraints exceeds the dense solver limit (" +
                          std::to_string(n) + " > " + std::to_string(opt.dense_limit) + ")");
  }
  const Matrix q = materialize_quadratic(p);
  const Vector c = p.linear.size() ? p.linear : Vector::Zero(n);
  const StackedConstraints s = stack_constraints(p);
  const Index m = s.a.rows();
  QpSolution sol;
  for (Index i = 0; i < m; ++i) {
    if (s.l[i] > s.u[i]) {
      sol.point = Vector::Zero(n);
      sol.status = QpStatus::kInfeasible;
      return sol;
    }
  }

  const double sigma = 1e-6;
  const double alpha = 1.6;
  double rho_base = 0.1;
  Vector rho(m);
  auto set_rho = [&]() {
    for (Index i = 0; i < m; ++i) {
      const bool eq = s.l[i] == s.u[i];
      const bool loose = !std::isfinite(s.l[i]) && !std::isfinite(s.u[i]);
      rho[i] = loose ? 1e-6 : (eq ? 1e3 * rho_base : rho_base);
    }
  };
  set_rho();
  Eigen::LLT<Eigen::MatrixXd> llt;
  auto factor = [&]() {
    Eigen::MatrixXd kmat = q;
    kmat.diagonal().array() += sigma;
    kmat.noalias() += s.a.transpose() * rho.asDiagonal() * s.a;
    llt.compute(kmat);
    if (llt.info() != Eigen::Success) throw SingularSystemError("ADMM KKT factorization failed");
  };
  factor();

  Vector x = opt.warm_start && opt.warm_start->size() == n ? *opt.warm_start : Vector::Zero(n);
  Vector z = (s.a * x).cwiseMax(s.l).cwiseMin(s.u);
  Vector y = Vector::Zero(m);
  Vector x_tilde(n), z_tilde(m), z_prev(m), y_prev(m), ax(m);

  const double eps = opt.tol;
  bool converged = false;
  int adapt_interval = 50;
  int next_adapt = adapt_interval;
  int it = 0;
  for (it = 1; it <= opt.max_iter; ++it) {
    const Vector rhs = sigma * x - c + s.a.transpose() * (rho.cwiseProduct(z) - y);
    x_tilde = llt.solve(rhs);
    z_tilde = s.a * x_tilde;
    x = alpha * x_tilde + (1.0 - alpha) * x;
    z_prev = z;
    y_prev = y;
    const Vector z_relaxed = alpha * z_tilde + (1.0 - alpha) * z_prev;
    z = (z_relaxed + y.cwiseQuotient(rho)).cwiseMax(s.l).cwiseMin(s.u);
    y += rho.cwiseProduct(z_relaxed - z);

    if (it % 10 != 0 && it != opt.max_iter) continue;

    ax = s.a * x;
    const Vector qx = q * x;
    const Vector aty = s.a.transpose() * y;
    const double r_prim = (ax - z).cwiseAbs().maxCoeff();
    const double r_dual = (qx + c + aty).cwiseAbs().maxCoeff();
    const double scale_prim = std::max(ax.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff());
    const double scale_dual = std::max({qx.cwiseAbs().maxCoeff(), aty.cwiseAbs().maxCoeff(),
                                        c.size() ? c.cwiseAbs().maxCoeff() : 0.0});
    if (opt.trace) {
      *opt.trace << it << ',' << format_double(p.objective(x)) << ',' << format_double(r_prim)
                 << '\n';
    }
    if (r_prim <= eps && (ax - s.l).minCoeff() >= -eps && (s.u - ax).minCoeff() >= -eps &&
        r_dual <= eps + eps * scale_dual) {
      converged = true;
      break;
    }

    // Primal infeasibility certificate: A' dy ~ 0 with u' dy+ + l' dy- < 0.
    const Vector dy = y - y_prev;
    const double dy_norm = dy.cwiseAbs().maxCoeff();
    if (dy_norm > 1e-12) {
      const double eps_inf = 1e-8;
      if ((s.a.transpose() * dy).cwiseAbs().maxCoeff() <= eps_inf * dy_norm) {
        double support = 0.0;
        bool bounded = true;
        for (Index i = 0; i < m && bounded; ++i) {
          if (dy[i] > 0.0) {
            if (!std::isfinite(s.u[i])) bounded = false;
            else support += s.u[i] * dy[i];
          } else if (dy[i] < 0.0) {
            if (!std::isfinite(s.l[i])) bounded = false;
            else support += s.l[i] * dy[i];
          }
        }
        if (bounded && support < -eps_inf * dy_norm) {
          sol.point = x;
          sol.objective = p.objective(x);
          sol.iterations = it;
          sol.primal_residual = r_prim;
          sol.dual_residual = r_dual;
          sol.status = QpStatus::kInfeasible;
          return sol;
        }
      }
    }

    // Rebalance the penalty when primal and dual progress diverge. The
    // interval doubles after every update so the penalty eventually settles.
    if (it >= next_adapt) {
      next_adapt = it + adapt_interval;
      const double ratio = std::sqrt((r_prim / std::max(scale_prim, 1e-12)) /
                                     std::max(r_dual / std::max(scale_dual, 1e-12), 1e-30));
      if (ratio > 5.0 || ratio < 0.2) {
        rho_base = std::clamp(rho_base * ratio, 1e-6, 1e6);
        set_rho();
        factor();
        adapt_interval *= 2;
        next_adapt = it + adapt_interval;
      }
    }
  }
  if (it > opt.max_iter) it = opt.max_iter;

  Vector x_pol, y_pol;
  if (polish(q, c, s, z, y, std::max(eps, 1e-9), x_pol, y_pol)) {
    x = std::move(x_pol);
    y = std::move(y_pol);
    sol.polished = true;
    converged = true;
  }
  const Residuals r = kkt_residuals(q, c, s, x, y);
  sol.point = std::move(x);
  sol.objective = p.objective(sol.point);
  sol.iterations = it;
  sol.primal_residual = r.primal;
  sol.dual_residual = r.dual;
  sol.complementarity = r.complementarity;
  sol.status = converged && r.primal <= eps ? QpStatus::kOptimal : QpStatus::kMaxIter;
  return sol;
}

}  // namespace

void QpProblem::apply_quadratic(std::span<const double> v, std::span<double> out) const {
  if (quadratic_op) {
    quadratic_op(v, out);
    return;
  }
  Eigen::Map<Vector> o(out.data(), static_cast<Index>(out.size()));
  if (quadratic) {
    o.noalias() = *quadratic * Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  } else {
    o.setZero();
  }
}

double QpProblem::objective(const Vector& v) const {
  Vector qv(v.size());
  apply_quadratic(as_span(v), as_span(qv));
  double f = 0.5 * v.dot(qv);
  if (linear.size()) f += linear.dot(v);
  return f;
}

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kMaxIter:
      return "max_iter";
    case QpStatus::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

double estimate_quadratic_norm(const QpProblem& problem, int iterations) {
  if (!problem.has_quadratic()) return 0.0;
  const Index n = problem.dimension;
  // Deterministic, non-degenerate start.
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
  v.normalize();
  Vector w(n);
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    problem.apply_quadratic(as_span(v), as_span(w));
    const double norm = w.norm();
    if (!(norm > 0.0)) return estimate;
    const double next = norm;
    v = w / norm;
    if (it > 3 && std::abs(next - estimate) <= 1e-6 * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

double smallest_eigenvalue(const Matrix& q) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options) {
  validate(problem);
  // Small linear programs go to ADMM, whose polishing step lands on a vertex.
  const bool small_lp = !problem.has_quadratic() && problem.dimension <= kSmallLinearProgram;
  if (problem.is_block_structured() && !small_lp) return solve_projected(problem, options);
  return solve_admm(problem, options);
}

QpSolution solve_qp(const QpProblem& problem, double tol, int max_iter) {
  QpOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return solve_qp(problem, options);
}

}  // namespace cacherec
