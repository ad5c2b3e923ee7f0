#pragma once

// Monte-Carlo realization of the request model: sessions start from p0,
// then each step follows a recommendation with probability a (uniform over
// an N-item list drawn with marginals N * y_ij) or requests from p0.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cacherec/linalg.hpp"
#include "cacherec/request_model.hpp"
#include "cacherec/rng.hpp"

namespace cacherec {

class CachePlacement {
 public:
  CachePlacement(Index catalog_size, std::vector<Index> cached);

  Index catalog_size() const noexcept { return static_cast<Index>(mask_.size()); }
  Index capacity() const noexcept { return static_cast<Index>(cached_.size()); }
  /// Sorted ascending.
  const std::vector<Index>& cached() const noexcept { return cached_; }
  bool contains(Index j) const { return mask_.at(static_cast<std::size_t>(j)) != 0; }
  CostVector cost() const;

 private:
  std::vector<Index> cached_;
  std::vector<char> mask_;
};

/// The C largest-p0 contents, lowest index first on ties.
CachePlacement top_c_cache(const PopularityVector& p0, Index capacity);

struct SessionLength {
  enum class Kind { kFixed, kGeometric };
  Kind kind = Kind::kFixed;
  double value = 200.0;  // M for fixed, mean for geometric

  static SessionLength fixed(int m) { return {Kind::kFixed, static_cast<double>(m)}; }
  static SessionLength geometric(double mean) { return {Kind::kGeometric, mean}; }
};

struct SessionConfig {
  std::int64_t total_requests = 40000;
  SessionLength session_length{};
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimMetrics {
  std::int64_t requests = 0;
  std::int64_t hits = 0;
  std::int64_t followed = 0;
  double quality_sum = 0.0;  // u_{prev,next} summed over followed steps
  std::vector<std::int64_t> per_content;

  double empirical_chr() const { return requests ? double(hits) / double(requests) : 0.0; }
  double mean_quality_served() const { return followed ? quality_sum / double(followed) : 0.0; }
  /// Associative and commutative.
  SimMetrics& merge(const SimMetrics& other);
};

/// Exactly N distinct items with inclusion probabilities N * y_j (systematic
/// sampling with a uniform start). Throws InfeasibleError if any N * y_j
/// exceeds 1 or the row does not sum to 1.
std::vector<Index> sample_rec_list(std::span<const double> row, int list_size, Rng& rng);

/// Precomputed per-row cumulative inclusion probabilities for repeated
/// sampling from the same matrix.
class RecListSampler {
 public:
  RecListSampler(const RecMatrix& y);
  void sample(Index row, Rng& rng, std::vector<Index>& out) const;
  int list_size() const noexcept { return list_size_; }

 private:
  int list_size_;
  Index size_;
  std::vector<double> cumulative_;  // K rows of K+1 prefix sums of N * y_ij
};

/// `log`, when given, receives "step,session,content,followed_rec,hit" rows.
SimMetrics simulate(const RecMatrix& y, const RequestModel& model, const CachePlacement& cache,
                    const SimilarityMatrix& u, const SessionConfig& cfg, std::ostream* log = nullptr);

PopularityVector empirical_content_distribution(const SimMetrics& metrics);

}  // namespace cacherec
