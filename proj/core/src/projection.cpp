#include "cacherec/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cacherec/error.hpp"

namespace cacherec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFaceTilt = 1e6;

struct BlockView {
  std::span<const double> v;
  std::span<const double> lower;
  std::span<const double> upper;
  std::span<const double> coeffs;
};

struct SumEval {
  double sum = 0.0;
  double free_count = 0.0;
  double free_coeff_sum = 0.0;
  double free_coeff_sq = 0.0;
  double value = 0.0;  // coeffs . y
};

double shifted(const BlockView& b, std::size_t j, double shift, double tilt) {
  double t = b.v[j] + shift;
  if (!b.coeffs.empty()) t += tilt * b.coeffs[j];
  return t;
}

SumEval evaluate(const BlockView& b, double shift, double tilt) {
  SumEval e;
  const bool has_coeffs = !b.coeffs.empty();
  for (std::size_t j = 0; j < b.v.size(); ++j) {
    const double t = shifted(b, j, shift, tilt);
    double y = t;
    if (t <= b.lower[j]) {
      y = b.lower[j];
    } else if (t >= b.upper[j]) {
      y = b.upper[j];
    } else {
      e.free_count += 1.0;
      if (has_coeffs) {
        e.free_coeff_sum += b.coeffs[j];
        e.free_coeff_sq += b.coeffs[j] * b.coeffs[j];
      }
    }
    e.sum += y;
    if (has_coeffs) e.value += b.coeffs[j] * y;
  }
  return e;
}

// Root of shift -> sum(clip(v + shift + tilt * coeffs)) = total. The map is
// nondecreasing and piecewise linear, so Newton steps inside a maintained
// bracket land exactly once the final linear piece is reached.
double solve_shift(const BlockView& b, double total, double lower_sum, double tilt, double guess) {
  const std::size_t n = b.v.size();
  double lo = kInf;
  double hi = -kInf;
  double all_above_lower = -kInf;
  bool unbounded = false;
  for (std::size_t j = 0; j < n; ++j) {
    const double t = shifted(b, j, 0.0, tilt);
    lo = std::min(lo, b.lower[j] - t);
    all_above_lower = std::max(all_above_lower, b.lower[j] - t);
    if (std::isfinite(b.upper[j])) {
      hi = std::max(hi, b.upper[j] - t);
    } else {
      unbounded = true;
    }
  }
  if (unbounded) hi = std::max(hi, all_above_lower + (total - lower_sum));

  const double tol = 1e-14 * std::max(1.0, std::abs(total)) * std::max(1.0, std::sqrt(double(n)));
  double shift = std::clamp(guess, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const SumEval e = evaluate(b, shift, tilt);
    const double r = e.sum - total;
    if (std::abs(r) <= tol) return shift;
    if (r < 0.0) {
      lo = shift;
    } else {
      hi = shift;
    }
    double next = 0.5 * (lo + hi);
    if (e.free_count > 0.0) {
      const double newton = shift - r / e.free_count;
      if (newton > lo && newton < hi) next = newton;
    }
    if (next == shift || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                                         std::max(1.0, std::abs(shift))) {
      return next;
    }
    shift = next;
  }
  return shift;
}

// Projection onto the face { coeffs . y maximal }: entries above the marginal
// coefficient sit at their upper bound, entries below it at their lower
// bound, and the tied entries share what is left.
void project_on_max_face(const BlockView& b, double total, std::span<double> out);

}  // namespace

Vector project_simplex(const Vector& v) {
  const Index n = v.size();
  if (n == 0) throw InvalidArgument("project_simplex: empty vector");
  if (!v.allFinite()) throw InvalidArgument("project_simplex: non-finite input");
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
  }
  Vector out = (v.array() - theta).max(0.0);
  // Absorb summation roundoff into the largest entry.
  Index arg = 0;
  out.maxCoeff(&arg);
  out[arg] += 1.0 - out.sum();
  return out;
}

Vector project_row_polytope(const Vector& v, int list_size, Index self_index) {
  const Index k = v.size();
  if (list_size < 1) throw InvalidArgument("project_row_polytope: list size must be >= 1");
  if (self_index < 0 || self_index >= k) {
    throw InvalidArgument("project_row_polytope: self index out of range");
  }
  if (static_cast<double>(k - 1) / list_size < 1.0) {
    throw InfeasibleError("row polytope is empty: (K-1)/N = " + std::to_string(k - 1) + "/" +
                          std::to_string(list_size) + " < 1");
  }
  std::vector<double> lower(static_cast<std::size_t>(k), 0.0);
  std::vector<double> upper(static_cast<std::size_t>(k), 1.0 / list_size);
  upper[static_cast<std::size_t>(self_index)] = 0.0;
  Vector out(k);
  project_block(std::span<const double>(v.data(), static_cast<std::size_t>(k)), lower, upper, 1.0,
                {}, 0.0, std::span<double>(out.data(), static_cast<std::size_t>(k)));
  return out;
}

double max_block_value(std::span<const double> lower, std::span<const double> upper,
                       double total, std::span<const double> coeffs) {
  const std::size_t n = lower.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return coeffs[x] > coeffs[y]; });
  double remaining = total;
  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    remaining -= lower[j];
    value += coeffs[j] * lower[j];
  }
  for (std::size_t j : order) {
    if (remaining <= 0.0) break;
    const double room = upper[j] - lower[j];
    const double take = std::min(room, remaining);
    value += coeffs[j] * take;
    remaining -= take;
  }
  return value;
}

void project_block(std::span<const double> v, std::span<const double> lower,
                   std::span<const double> upper, double total,
                   std::span<const double> coeffs, double threshold, std::span<double> out,
                   BlockHint* hint) {
  const std::size_t n = v.size();
  if (lower.size() != n || upper.size() != n || out.size() != n ||
      (!coeffs.empty() && coeffs.size() != n)) {
    throw DimensionError("project_block: span sizes disagree");
  }
  if (n == 0) throw InvalidArgument("project_block: empty block");

  double lower_sum = 0.0;
  double upper_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(lower[j])) throw InvalidArgument("project_block: lower bounds must be finite");
    if (upper[j] < lower[j]) throw InfeasibleError("project_block: upper bound below lower bound");
    lower_sum += lower[j];
    upper_sum += upper[j];
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(total));
  if (total < lower_sum - slack || total > upper_sum + slack) {
    throw InfeasibleError("project_block: sum target " + std::to_string(total) +
                          " outside [" + std::to_string(lower_sum) + ", " +
                          std::to_string(upper_sum) + "]");
  }

  const BlockView b{v, lower, upper, coeffs};
  BlockHint local;
  BlockHint& h = hint ? *hint : local;

  double tilt = 0.0;
  double shift = solve_shift(b, total, lower_sum, 0.0, h.tilt == 0.0 ? h.shift : 0.0);
  if (!coeffs.empty()) {
    const double value_tol = 1e-13 * std::max(1.0, std::abs(threshold));
    SumEval e = evaluate(b, shift, 0.0);
    if (e.value < threshold - value_tol) {
      // coeffs . y(tilt) is nondecreasing in tilt; bracket the crossing.
      double t_lo = 0.0;
      double t_hi = h.tilt > 0.0 ? h.tilt : 1.0;
      double s_hi = solve_shift(b, total, lower_sum, t_hi, h.shift);
      SumEval e_hi = evaluate(b, s_hi, t_hi);
      // A huge tilt means the threshold sits at the best attainable value,
      // where v + shift + tilt * coeffs loses all precision.
      bool checked_face = false;
      auto threshold_at_max = [&] {
        const double best = max_block_value(lower, upper, total, coeffs);
        const double gap_tol = 1e-9 * std::max(1.0, std::abs(threshold));
        if (best < threshold - gap_tol) {
          throw InfeasibleError("project_block: max attainable " + std::to_string(best) +
                                " below threshold " + std::to_string(threshold));
        }
        return best <= threshold + gap_tol;
      };
      auto finish_on_face = [&] {
        project_on_max_face(b, total, out);
        h.shift = 0.0;
        h.tilt = 0.0;
      };
      while (e_hi.value < threshold - value_tol) {
        t_lo = t_hi;
        t_hi *= 4.0;
        if (t_hi > kFaceTilt && !checked_face) {
          checked_face = true;
          if (threshold_at_max()) return finish_on_face();
        }
        s_hi = solve_shift(b, total, lower_sum, t_hi, s_hi);
        e_hi = evaluate(b, s_hi, t_hi);
      }
      tilt = t_hi;
      shift = s_hi;
      e = e_hi;
      for (int it = 0; it < 200 && std::abs(e.value - threshold) > value_tol; ++it) {
        if (e.value < threshold) {
          t_lo = tilt;
        } else {
          t_hi = tilt;
        }
        double next = 0.5 * (t_lo + t_hi);
        if (e.free_count > 0.0) {
          const double slope = e.free_coeff_sq - e.free_coeff_sum * e.free_coeff_sum / e.free_count;
          if (slope > 0.0) {
            const double newton = tilt - (e.value - threshold) / slope;
            if (newton > t_lo && newton < t_hi) next = newton;
          }
        }
        if (next == tilt) break;
        tilt = next;
        shift = solve_shift(b, total, lower_sum, tilt, shift);
        e = evaluate(b, shift, tilt);
        if (t_hi - t_lo <= 4.0 * std::numeric_limits<double>::epsilon() * t_hi) break;
      }
      if (e.value < threshold - value_tol) {
        // Finish on the feasible side of the bracket.
        tilt = t_hi;
        shift = solve_shift(b, total, lower_sum, tilt, shift);
      }
      if (tilt > kFaceTilt && !checked_face && threshold_at_max()) return finish_on_face();
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::clamp(shifted(b, j, shift, tilt), lower[j], upper[j]);
  }
  h.shift = shift;
  h.tilt = tilt;
}

}  // namespace cacherec

namespace cacherec {
namespace {

void project_on_max_face(const BlockView& b, double total, std::span<double> out) {
  const std::size_t n = b.v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return b.coeffs[x] > b.coeffs[y]; });
  double remaining = total;
  for (std::size_t j = 0; j < n; ++j) remaining -= b.lower[j];
  double marginal = -kInf;
  for (std::size_t j : order) {
    if (remaining <= 0.0) break;
    marginal = b.coeffs[j];
    remaining -= b.upper[j] - b.lower[j];
  }
  std::vector<std::size_t> tied;
  double tied_total = total;
  for (std::size_t j = 0; j < n; ++j) {
    if (b.coeffs[j] > marginal) {
      out[j] = b.upper[j];
      tied_total -= b.upper[j];
    } else if (b.coeffs[j] < marginal) {
      out[j] = b.lower[j];
      tied_total -= b.lower[j];
    } else {
      tied.push_back(j);
    }
  }
  if (tied.empty()) return;
  std::vector<double> v(tied.size()), lo(tied.size()), hi(tied.size()), y(tied.size());
  double lo_sum = 0.0, hi_sum = 0.0;
  for (std::size_t t = 0; t < tied.size(); ++t) {
    v[t] = b.v[tied[t]];
    lo[t] = b.lower[tied[t]];
    hi[t] = b.upper[tied[t]];
    lo_sum += lo[t];
    hi_sum += hi[t];
  }
  project_block(v, lo, hi, std::clamp(tied_total, lo_sum, hi_sum), {}, 0.0, y);
  for (std::size_t t = 0; t < tied.size(); ++t) out[tied[t]] = y[t];
}

}  // namespace
}  // namespace cacherec
