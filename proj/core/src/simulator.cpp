#include "cacherec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "cacherec/error.hpp"

namespace cacherec {
namespace {

constexpr double kMarginalTol = 1e-9;

// Prefix sums of N * y_j scaled to end exactly at N.
void inclusion_prefix(std::span<const double> row, int list_size, double* out) {
  const std::size_t k = row.size();
  double total = 0.0;
  out[0] = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double z = list_size * row[j];
    if (!(z >= -kMarginalTol) || z > 1.0 + kMarginalTol) {
      throw InfeasibleError("inclusion probability " + std::to_string(z) + " for item " +
                            std::to_string(j) + " outside [0, 1]");
    }
    total += std::clamp(z, 0.0, 1.0);
    out[j + 1] = total;
  }
  if (std::abs(total - list_size) > 1e-6 * list_size) {
    throw InfeasibleError("inclusion probabilities sum to " + std::to_string(total) + ", expected " +
                          std::to_string(list_size));
  }
  const double scale = list_size / total;
  for (std::size_t j = 1; j <= k; ++j) out[j] *= scale;
  out[k] = list_size;
}

// Item whose interval [S_j, S_j+1) holds `point`.
Index locate(const double* prefix, std::size_t k, double point) {
  const double* hit = std::upper_bound(prefix + 1, prefix + k + 1, point);
  return static_cast<Index>(std::min<std::ptrdiff_t>(hit - (prefix + 1), std::ptrdiff_t(k) - 1));
}

void systematic(const double* prefix, std::size_t k, int list_size, Rng& rng,
                std::vector<Index>& out) {
  out.clear();
  const double start = rng.uniform();
  for (int m = 0; m < list_size; ++m) {
    Index j = locate(prefix, k, start + m);
    // Rounding can put two points in one width-1 interval; take the next
    // unused item with positive width.
    while (!out.empty() && j <= out.back()) {
      ++j;
      while (static_cast<std::size_t>(j) < k && prefix[j + 1] <= prefix[j]) ++j;
      if (static_cast<std::size_t>(j) >= k) throw InfeasibleError("systematic sampling overflow");
    }
    out.push_back(j);
  }
}

std::vector<double> popularity_prefix(const PopularityVector& p0) {
  const Vector& p = p0.values();
  std::vector<double> prefix(static_cast<std::size_t>(p.size()) + 1, 0.0);
  for (Index j = 0; j < p.size(); ++j) prefix[std::size_t(j) + 1] = prefix[std::size_t(j)] + p[j];
  const double total = prefix.back();
  for (double& v : prefix) v /= total;
  prefix.back() = 1.0;
  return prefix;
}

Index draw_popular(const std::vector<double>& prefix, Rng& rng) {
  const std::size_t k = prefix.size() - 1;
  Index j = locate(prefix.data(), k, rng.uniform());
  while (prefix[std::size_t(j) + 1] <= prefix[std::size_t(j)]) ++j;  // skip zero-mass items
  return j;
}

}  // namespace

CachePlacement::CachePlacement(Index catalog_size, std::vector<Index> cached)
    : cached_(std::move(cached)), mask_(static_cast<std::size_t>(catalog_size), 0) {
  if (catalog_size < 1) throw InvalidArgument("cache: catalog must be nonempty");
  std::sort(cached_.begin(), cached_.end());
  for (Index j : cached_) {
    if (j < 0 || j >= catalog_size) throw InvalidArgument("cache: content id out of range");
    if (mask_[std::size_t(j)]) throw InvalidArgument("cache: duplicate content id");
    mask_[std::size_t(j)] = 1;
  }
}

CostVector CachePlacement::cost() const {
  return CostVector::cache_indicator(catalog_size(), cached_);
}

CachePlacement top_c_cache(const PopularityVector& p0, Index capacity) {
  const Index k = p0.size();
  if (capacity < 0 || capacity > k) {
    throw InvalidArgument("cache capacity " + std::to_string(capacity) + " outside [0, " +
                          std::to_string(k) + "]");
  }
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector& p = p0.values();
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return p[x] > p[y]; });
  order.resize(static_cast<std::size_t>(capacity));
  return CachePlacement(k, std::move(order));
}

void SessionConfig::validate() const {
  if (total_requests < 1) throw InvalidArgument("session: totalRequests must be >= 1");
  if (session_length.kind == SessionLength::Kind::kFixed) {
    if (session_length.value < 1.0 || session_length.value != std::floor(session_length.value)) {
      throw InvalidArgument("session: fixed length must be a positive integer");
    }
  } else if (!(session_length.value >= 1.0)) {
    throw InvalidArgument("session: geometric mean must be >= 1");
  }
}

SimMetrics& SimMetrics::merge(const SimMetrics& other) {
  if (per_content.size() < other.per_content.size()) per_content.resize(other.per_content.size(), 0);
  for (std::size_t j = 0; j < other.per_content.size(); ++j) per_content[j] += other.per_content[j];
  requests += other.requests;
  hits += other.hits;
  followed += other.followed;
  quality_sum += other.quality_sum;
  return *this;
}

std::vector<Index> sample_rec_list(std::span<const double> row, int list_size, Rng& rng) {
  if (list_size < 1 || static_cast<std::size_t>(list_size) > row.size()) {
    throw InvalidArgument("sample_rec_list: list size out of range");
  }
  std::vector<double> prefix(row.size() + 1);
  inclusion_prefix(row, list_size, prefix.data());
  std::vector<Index> out;
  systematic(prefix.data(), row.size(), list_size, rng, out);
  return out;
}

RecListSampler::RecListSampler(const RecMatrix& y)
    : list_size_(y.list_size()),
      size_(y.size()),
      cumulative_(static_cast<std::size_t>(size_ * (size_ + 1))) {
  const Matrix& v = y.values();
  for (Index i = 0; i < size_; ++i) {
    inclusion_prefix({v.row(i).data(), static_cast<std::size_t>(size_)}, list_size_,
                     cumulative_.data() + i * (size_ + 1));
  }
}

void RecListSampler::sample(Index row, Rng& rng, std::vector<Index>& out) const {
  systematic(cumulative_.data() + row * (size_ + 1), static_cast<std::size_t>(size_), list_size_,
             rng, out);
}

SimMetrics simulate(const RecMatrix& y, const RequestModel& model, const CachePlacement& cache,
                    const SimilarityMatrix& u, const SessionConfig& cfg, std::ostream* log) {
  cfg.validate();
  const Index k = model.size();
  if (y.size() != k || cache.catalog_size() != k || u.size() != k) {
    throw DimensionError("simulate: inputs disagree on catalog size");
  }
  if (y.list_size() != model.list_size()) throw DimensionError("simulate: list size mismatch");

  const RecListSampler sampler(y);
  const std::vector<double> p0 = popularity_prefix(model.popularity());
  Rng rng(cfg.seed);
  const double a = model.follow_prob();
  const int n = model.list_size();

  SimMetrics m;
  m.per_content.assign(static_cast<std::size_t>(k), 0);
  std::vector<Index> list;
  list.reserve(static_cast<std::size_t>(n));
  if (log) *log << "step,session,content,followed_rec,hit\n";

  std::int64_t session = 0;
  while (m.requests < cfg.total_requests) {
    std::int64_t length;
    if (cfg.session_length.kind == SessionLength::Kind::kFixed) {
      length = static_cast<std::int64_t>(cfg.session_length.value);
    } else {
      // P(L = l) = (1 - 1/mean)^(l-1) / mean.
      const double stop = 1.0 / cfg.session_length.value;
      length = 1;
      while (stop < 1.0 && !rng.bernoulli(stop)) ++length;
    }
    Index current = -1;
    for (std::int64_t s = 0; s < length && m.requests < cfg.total_requests; ++s) {
      Index next;
      bool followed = false;
      if (current >= 0 && rng.bernoulli(a)) {
        sampler.sample(current, rng, list);
        next = list[rng.below(static_cast<std::uint64_t>(n))];
        followed = true;
      } else {
        next = draw_popular(p0, rng);
      }
      const bool hit = cache.contains(next);
      if (followed) {
        ++m.followed;
        m.quality_sum += u(current, next);
      }
      ++m.per_content[std::size_t(next)];
      m.hits += hit ? 1 : 0;
      if (log) {
        *log << m.requests << ',' << session << ',' << next << ',' << (followed ? 1 : 0) << ','
             << (hit ? 1 : 0) << '\n';
      }
      ++m.requests;
      current = next;
    }
    ++session;
  }
  return m;
}

PopularityVector empirical_content_distribution(const SimMetrics& metrics) {
  if (metrics.requests <= 0) throw InvalidArgument("no requests recorded");
  Vector counts(static_cast<Index>(metrics.per_content.size()));
  for (std::size_t j = 0; j < metrics.per_content.size(); ++j) {
    counts[Index(j)] = static_cast<double>(metrics.per_content[j]);
  }
  return PopularityVector::normalized(counts);
}

}  // namespace cacherec
