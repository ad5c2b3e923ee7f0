#pragma once

#include <span>

#include "cacherec/linalg.hpp"

namespace cacherec {

/// Exact minimizer of costs . y over one recommendation row
///   { sum y = 1, 0 <= y <= 1/N, y[self] = 0, quality . y >= threshold }.
///
/// Lagrangian relaxation of the quality constraint leaves a problem solved by
/// putting mass 1/N on the N smallest reduced costs c_j - m * u_j (ties go to
/// the lowest index). The multiplier m is bracketed by bisection and the
/// optimum is the convex combination of the two greedy rows on either side
/// of the crossing that meets the threshold with equality.
///
/// Throws InfeasibleError naming the best attainable quality when even the N
/// most related items fall short of the threshold.
Vector minimize_row_linear(std::span<const double> costs, std::span<const double> quality,
                           int list_size, Index self_index, double threshold);

/// Quality of the row that puts 1/N on the N largest quality entries.
double max_row_quality(std::span<const double> quality, int list_size, Index self_index);

/// The quality-maximal row: 1/N on the N largest entries (lowest index on ties).
Vector top_quality_row(std::span<const double> quality, int list_size, Index self_index);

}  // namespace cacherec
