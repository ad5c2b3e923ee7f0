#include "cacherec/request_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "cacherec/diagnostics.hpp"
#include "cacherec/error.hpp"

namespace cacherec {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << " must be square, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

void require_same_size(Index a, Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": size mismatch " << a << " vs " << b;
    throw DimensionError(os.str());
  }
}

}  // namespace

Catalog::Catalog(Index size) {
  if (size < 2) throw InvalidArgument("catalog needs at least 2 contents");
  ids_.reserve(static_cast<std::size_t>(size));
  for (Index i = 0; i < size; ++i) ids_.push_back(std::to_string(i));
}

Catalog::Catalog(std::vector<std::string> ids) : ids_(std::move(ids)) {
  if (ids_.size() < 2) throw InvalidArgument("catalog needs at least 2 contents");
  std::unordered_set<std::string> seen(ids_.begin(), ids_.end());
  if (seen.size() != ids_.size()) throw InvalidArgument("catalog ids must be unique");
}

SimilarityMatrix::SimilarityMatrix(Matrix values) : values_(std::move(values)) {
  require_square(values_, "similarity matrix");
  for (Index i = 0; i < values_.rows(); ++i) {
    if (values_(i, i) != 0.0) {
      throw InvalidArgument("similarity matrix diagonal must be zero (row " + std::to_string(i) +
                            ")");
    }
    for (Index j = 0; j < values_.cols(); ++j) {
      const double v = values_(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << "similarity entry (" << i << "," << j << ") = " << v << " outside [0,1]";
        throw InvalidArgument(os.str());
      }
    }
  }
}

PopularityVector::PopularityVector(Vector values) : values_(std::move(values)) {
  if (values_.size() == 0) throw InvalidArgument("popularity vector is empty");
  for (Index i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
      throw InvalidArgument("popularity entry " + std::to_string(i) + " is negative or non-finite");
    }
  }
  const double total = values_.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "popularity vector sums to " << total << ", expected 1";
    throw InvalidArgument(os.str());
  }
}

PopularityVector PopularityVector::normalized(const Vector& weights) {
  if (weights.size() == 0) throw InvalidArgument("popularity vector is empty");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw InvalidArgument("popularity weights must be finite and nonnegative");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidArgument("popularity weights sum to zero");
  return PopularityVector(weights / total);
}

CostVector::CostVector(Vector values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw InvalidArgument("cost entry " + std::to_string(i) + " is negative or non-finite");
    }
  }
}

CostVector CostVector::cache_indicator(Index size, std::span<const Index> cached) {
  Vector x = Vector::Ones(size);
  for (Index c : cached) {
    if (c < 0 || c >= size) throw InvalidArgument("cached id out of range");
    x[c] = 0.0;
  }
  return CostVector(std::move(x));
}

std::string RecViolation::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind) {
    case Kind::kBox:
      os << "box violation at (" << row << "," << column << ") by " << magnitude;
      break;
    case Kind::kRowSum:
      os << "row " << row << " sums off unity by " << magnitude;
      break;
    case Kind::kDiagonal:
      os << "diagonal entry " << row << " nonzero (" << magnitude << ")";
      break;
    case Kind::kNonFinite:
      os << "non-finite entry at (" << row << "," << column << ")";
      break;
  }
  return os.str();
}

std::vector<RecViolation> validate_rec_matrix(const Matrix& y, int list_size, double tol) {
  require_square(y, "recommendation matrix");
  if (list_size < 1) throw InvalidArgument("list size must be >= 1");
  std::vector<RecViolation> out;
  const double cap = 1.0 / list_size;
  for (Index i = 0; i < y.rows(); ++i) {
    double row_sum = 0.0;
    bool finite = true;
    for (Index j = 0; j < y.cols(); ++j) {
      const double v = y(i, j);
      if (!std::isfinite(v)) {
        out.push_back({RecViolation::Kind::kNonFinite, i, j, 0.0});
        finite = false;
        continue;
      }
      row_sum += v;
      if (i == j) {
        if (std::abs(v) > tol) out.push_back({RecViolation::Kind::kDiagonal, i, j, std::abs(v)});
        continue;
      }
      if (v < -tol) out.push_back({RecViolation::Kind::kBox, i, j, -v});
      if (v > cap + tol) out.push_back({RecViolation::Kind::kBox, i, j, v - cap});
    }
    if (finite && std::abs(row_sum - 1.0) > tol) {
      out.push_back({RecViolation::Kind::kRowSum, i, -1, std::abs(row_sum - 1.0)});
    }
  }
  return out;
}

RecMatrix::RecMatrix(Matrix values, int list_size, double tol)
    : values_(std::move(values)), list_size_(list_size), tol_(tol) {
  const auto violations = validate_rec_matrix(values_, list_size_, tol_);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "infeasible recommendation matrix (" << violations.size() << " violations)";
    for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 3); ++k) {
      os << "; " << violations[k].describe();
    }
    throw InvalidArgument(os.str());
  }
}

RequestModel::RequestModel(PopularityVector popularity, double follow_prob, int list_size)
    : popularity_(std::move(popularity)), follow_prob_(follow_prob), list_size_(list_size) {
  if (!(follow_prob_ >= 0.0 && follow_prob_ < 1.0)) {
    throw InvalidArgument("follow probability must lie in [0, 1)");
  }
  if (list_size_ < 1 || list_size_ >= popularity_.size()) {
    throw InvalidArgument("list size N must satisfy 1 <= N < K");
  }
  const auto zeros = (popularity_.values().array() == 0.0).count();
  if (zeros > 0) {
    warn(std::to_string(zeros) +
         " contents have zero direct-request probability; the chain may not be ergodic");
  }
}

StationaryVector::StationaryVector(Vector values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw InvalidArgument("stationary vector has non-finite entries");
}

Matrix build_transition(const RecMatrix& y, const RequestModel& model) {
  require_same_size(y.size(), model.size(), "build_transition");
  const double a = model.follow_prob();
  Matrix p = a * y.values();
  p.rowwise() += ((1.0 - a) * model.popularity().values()).transpose();
  return p;
}

double stationarity_residual(const Vector& pi, const RecMatrix& y, const RequestModel& model) {
  require_same_size(pi.size(), y.size(), "stationarity_residual");
  require_same_size(pi.size(), model.size(), "stationarity_residual");
  const double a = model.follow_prob();
  const Vector next = a * (y.values().transpose() * pi) +
                      (1.0 - a) * pi.sum() * model.popularity().values();
  return (pi - next).cwiseAbs().maxCoeff();
}

StationaryVector stationary_direct(const RecMatrix& y, const RequestModel& model) {
  require_same_size(y.size(), model.size(), "stationary_direct");
  const Index k = y.size();
  const double a = model.follow_prob();
  // (I - aY)^T pi = (1 - a) p0
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(k, k) - a * y.values().transpose();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Vector rhs = (1.0 - a) * model.popularity().values();
  Vector pi = lu.solve(rhs);
  if (!pi.allFinite() || !(lu.rcond() > 1e-14)) {
    throw SingularSystemError("stationary system (I - aY)^T is singular (rcond " +
                              std::to_string(lu.rcond()) + ")");
  }
  // One refinement step keeps the stationarity residual near machine precision
  // for the larger catalogs.
  pi += lu.solve(rhs - system * pi);
  const double mass = pi.sum();
  if (!(mass > 0.0)) throw SingularSystemError("stationary solve produced zero mass");
  pi /= mass;
  return StationaryVector(std::move(pi));
}

StationaryVector stationary_power(const Matrix& transition, double tol, int max_iter) {
  require_square(transition, "transition matrix");
  const Index k = transition.rows();
  Vector pi = Vector::Constant(k, 1.0 / static_cast<double>(k));
  double change = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector next = transition.transpose() * pi;
    change = (next - pi).lpNorm<1>();
    pi = std::move(next);
    if (change <= tol) {
      pi /= pi.sum();
      return StationaryVector(std::move(pi));
    }
  }
  throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iter) +
                             " steps (last L1 change " + std::to_string(change) + ")",
                         change);
}

double expected_cost(const StationaryVector& pi, const CostVector& cost) {
  require_same_size(pi.size(), cost.size(), "expected_cost");
  return pi.values().dot(cost.values());
}

double finite_horizon_cost(const RecMatrix& y, const RequestModel& model, const CostVector& cost,
                           int horizon) {
  require_same_size(y.size(), model.size(), "finite_horizon_cost");
  require_same_size(y.size(), cost.size(), "finite_horizon_cost");
  if (horizon < 0) throw InvalidArgument("horizon must be >= 0");
  const double a = model.follow_prob();
  const Vector& p0 = model.popularity().values();
  Vector dist = p0;
  double total = 0.0;
  for (int m = 0; m <= horizon; ++m) {
    total += dist.dot(cost.values());
    if (m == horizon) break;
    const double mass = dist.sum();
    dist = a * (y.values().transpose() * dist) + (1.0 - a) * mass * p0;
  }
  return total;
}

double cache_hit_ratio(const RecMatrix& y, const RequestModel& model,
                       std::span<const Index> cached) {
  const CostVector x = CostVector::cache_indicator(y.size(), cached);
  const double miss = expected_cost(stationary_direct(y, model), x);
  return std::clamp(1.0 - miss, 0.0, 1.0);
}

Vector quality_of(const RecMatrix& y, const SimilarityMatrix& u) {
  require_same_size(y.size(), u.size(), "quality_of");
  return y.values().cwiseProduct(u.values()).rowwise().sum();
}

}  // namespace cacherec
