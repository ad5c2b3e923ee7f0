#pragma once

// Euclidean projections onto the polytopes the optimizers work over.

#include <span>

#include "cacherec/linalg.hpp"

namespace cacherec {

/// Projection onto {v : sum v = 1, v >= 0} by sorting and thresholding.
Vector project_simplex(const Vector& v);

/// Projection onto {y : sum y = 1, 0 <= y <= 1/N, y[self] = 0}.
/// Throws InfeasibleError when (K - 1) / N < 1.
Vector project_row_polytope(const Vector& v, int list_size, Index self_index);

/// Multipliers of a block projection, reused as a starting point on the next
/// call for nearby inputs.
struct BlockHint {
  double shift = 0.0;    // multiplier of the sum equality
  double tilt = 0.0;     // multiplier of the linear inequality (>= 0)
};

/// Projection of `v` onto
///   { y : lower <= y <= upper, sum(y) = total, coeffs . y >= threshold }
/// written to `out`. The inequality is dropped when `coeffs` is empty.
/// Lower bounds must be finite; upper bounds may be +inf.
///
/// The solution has the form y = clip(v + shift + tilt * coeffs, lower, upper);
/// `shift` is the root of a monotone piecewise-linear sum and `tilt` the root
/// of the (also monotone) constraint value, both found by safeguarded Newton
/// steps. Throws InfeasibleError when the set is empty.
void project_block(std::span<const double> v, std::span<const double> lower,
                   std::span<const double> upper, double total,
                   std::span<const double> coeffs, double threshold, std::span<double> out,
                   BlockHint* hint = nullptr);

/// Largest coeffs . y over { lower <= y <= upper, sum(y) = total } (greedy fill).
double max_block_value(std::span<const double> lower, std::span<const double> upper,
                       double total, std::span<const double> coeffs);

}  // namespace cacherec
