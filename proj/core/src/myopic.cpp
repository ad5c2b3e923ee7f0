#include <cmath>
#include <sstream>

#include "cacherec/error.hpp"
#include "cacherec/optim.hpp"
#include "cacherec/parallel.hpp"
#include "cacherec/row_lp.hpp"

namespace cacherec {
namespace {

std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

OptimInputs::OptimInputs(SimilarityMatrix similarity, RequestModel model, CostVector cost,
                         Vector quality)
    : similarity_(std::move(similarity)),
      model_(std::move(model)),
      cost_(std::move(cost)),
      quality_(std::move(quality)) {
  validate();
}

OptimInputs::OptimInputs(SimilarityMatrix similarity, RequestModel model, CostVector cost,
                         double quality)
    : similarity_(std::move(similarity)), model_(std::move(model)), cost_(std::move(cost)) {
  quality_ = Vector::Constant(model_.size(), quality);
  validate();
}

void OptimInputs::validate() const {
  const Index k = model_.size();
  if (similarity_.size() != k || cost_.size() != k || quality_.size() != k) {
    std::ostringstream os;
    os << "optimizer inputs disagree on catalog size: U " << similarity_.size() << ", p0 " << k
       << ", x " << cost_.size() << ", q " << quality_.size();
    throw DimensionError(os.str());
  }
  const int n = model_.list_size();
  for (Index i = 0; i < k; ++i) {
    if (!(quality_[i] >= 0.0 && quality_[i] <= 1.0)) {
      throw InvalidArgument("quality threshold of row " + std::to_string(i) + " outside [0,1]");
    }
    const double best = max_row_quality(row_span(similarity_.values(), i), n, i);
    if (best < quality_[i] - 1e-12) {
      std::ostringstream os;
      os.precision(6);
      os << "row " << i << " is infeasible: quality threshold " << quality_[i]
         << " exceeds the best attainable " << best << " with N=" << n
         << "; lower q or prune contents with too few related items";
      throw InfeasibleError(os.str());
    }
  }
}

RecMatrix myopic_solve(const OptimInputs& in, int threads) {
  const Index k = in.size();
  const int n = in.model().list_size();
  const Vector& x = in.cost().values();
  const std::span<const double> costs(x.data(), static_cast<std::size_t>(k));
  Matrix y = Matrix::Zero(k, k);
  // Row i minimizes sum_j y_ij x_j; the weight a * p0_i does not move the argmin.
  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t r) {
    const auto i = static_cast<Index>(r);
    y.row(i) = minimize_row_linear(costs, row_span(in.similarity().values(), i), n, i,
                                   in.quality()[i])
                   .transpose();
  });
  return RecMatrix(std::move(y), n);
}

double myopic_objective(const Matrix& y, const OptimInputs& in) {
  const double a = in.model().follow_prob();
  const Vector& p0 = in.model().popularity().values();
  const Vector& x = in.cost().values();
  return a * p0.dot(y * x) + (1.0 - a) * p0.dot(x);
}

RecMatrix top_similarity_rec(const SimilarityMatrix& u, int list_size) {
  const Index k = u.size();
  Matrix y(k, k);
  for (Index i = 0; i < k; ++i) {
    y.row(i) = top_quality_row(row_span(u.values(), i), list_size, i).transpose();
  }
  return RecMatrix(std::move(y), list_size);
}

}  // namespace cacherec
