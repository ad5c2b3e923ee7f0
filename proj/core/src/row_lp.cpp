#include "cacherec/row_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "cacherec/error.hpp"

namespace cacherec {
namespace {

// Candidates other than `self`, first N by `less`, returned as indices.
template <typename Less>
std::vector<Index> select_first(Index k, int list_size, Index self, Less less) {
  std::vector<Index> ids;
  ids.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    if (j != self) ids.push_back(j);
  }
  const auto n = static_cast<std::ptrdiff_t>(list_size);
  std::nth_element(ids.begin(), ids.begin() + n - 1, ids.end(), less);
  ids.resize(static_cast<std::size_t>(list_size));
  return ids;
}

void check_row(std::size_t k, int list_size, Index self) {
  if (list_size < 1) throw InvalidArgument("list size must be >= 1");
  if (self < 0 || static_cast<std::size_t>(self) >= k) throw InvalidArgument("self index out of range");
  if (static_cast<std::size_t>(list_size) > k - 1) {
    throw InfeasibleError("row has fewer than N candidate items");
  }
}

std::vector<Index> top_quality_ids(std::span<const double> quality, int list_size, Index self) {
  const Index k = static_cast<Index>(quality.size());
  return select_first(k, list_size, self, [&](Index x, Index y) {
    if (quality[x] != quality[y]) return quality[x] > quality[y];
    return x < y;
  });
}

}  // namespace

double max_row_quality(std::span<const double> quality, int list_size, Index self_index) {
  check_row(quality.size(), list_size, self_index);
  double total = 0.0;
  for (Index j : top_quality_ids(quality, list_size, self_index)) total += quality[j];
  return total / list_size;
}

Vector top_quality_row(std::span<const double> quality, int list_size, Index self_index) {
  check_row(quality.size(), list_size, self_index);
  Vector row = Vector::Zero(static_cast<Index>(quality.size()));
  for (Index j : top_quality_ids(quality, list_size, self_index)) row[j] = 1.0 / list_size;
  return row;
}

Vector minimize_row_linear(std::span<const double> costs, std::span<const double> quality,
                           int list_size, Index self_index, double threshold) {
  if (costs.size() != quality.size()) throw DimensionError("row LP: cost/quality size mismatch");
  check_row(costs.size(), list_size, self_index);
  const Index k = static_cast<Index>(costs.size());
  const double inv_n = 1.0 / list_size;

  struct Greedy {
    std::vector<Index> ids;
    double quality = 0.0;
  };
  auto greedy = [&](double m) {
    Greedy g;
    g.ids = select_first(k, list_size, self_index, [&](Index x, Index y) {
      const double rx = costs[x] - m * quality[x];
      const double ry = costs[y] - m * quality[y];
      if (rx != ry) return rx < ry;
      return x < y;
    });
    for (Index j : g.ids) g.quality += quality[j];
    g.quality *= inv_n;
    return g;
  };
  auto to_row = [&](const Greedy& g, double weight, Vector& row) {
    for (Index j : g.ids) row[j] += weight * inv_n;
  };

  Vector row = Vector::Zero(k);
  Greedy low = greedy(0.0);
  if (low.quality >= threshold) {
    to_row(low, 1.0, row);
    return row;
  }

  const double best = max_row_quality(quality, list_size, self_index);
  if (best < threshold - 1e-12) {
    std::ostringstream os;
    os.precision(6);
    os << "row " << self_index << " cannot reach quality " << threshold
       << " (max attainable " << best << ")";
    throw InfeasibleError(os.str());
  }

  // Bracket the multiplier at which the greedy row first meets the threshold.
  double m_lo = 0.0;
  double m_hi = 1.0;
  Greedy high = greedy(m_hi);
  int grow = 0;
  while (high.quality < threshold && grow < 1100) {
    m_lo = m_hi;
    low = std::move(high);
    m_hi *= 2.0;
    ++grow;
    high = std::isfinite(m_hi) ? greedy(m_hi) : Greedy{};
    if (!std::isfinite(m_hi)) break;
  }
  if (!std::isfinite(m_hi) || high.quality < threshold) {
    // Only the quality ordering matters this far out.
    high.ids = select_first(k, list_size, self_index, [&](Index x, Index y) {
      if (quality[x] != quality[y]) return quality[x] > quality[y];
      if (costs[x] != costs[y]) return costs[x] < costs[y];
      return x < y;
    });
    high.quality = 0.0;
    for (Index j : high.ids) high.quality += quality[j];
    high.quality *= inv_n;
  } else {
    for (int it = 0; it < 2000; ++it) {
      // Both greedy rows minimize the Lagrangian at the crossing up to
      // (m_hi - m_lo) * |quality|, so a relative-epsilon bracket is exact.
      if (m_hi - m_lo <= 4e-16 * m_hi || m_hi < 1e-250) break;
      const double mid = 0.5 * (m_lo + m_hi);
      if (!(mid > m_lo && mid < m_hi)) break;
      Greedy g = greedy(mid);
      if (g.quality >= threshold) {
        m_hi = mid;
        high = std::move(g);
      } else {
        m_lo = mid;
        low = std::move(g);
      }
    }
  }

  if (high.quality <= threshold || high.quality == low.quality) {
    to_row(high, 1.0, row);
    return row;
  }
  const double theta = (high.quality - threshold) / (high.quality - low.quality);
  to_row(low, theta, row);
  to_row(high, 1.0 - theta, row);
  return row;
}

}  // namespace cacherec
