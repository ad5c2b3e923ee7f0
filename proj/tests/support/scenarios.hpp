#pragma once

#include <random>

#include "cacherec/dataset.hpp"
#include "cacherec/optim.hpp"
#include "cacherec/simulator.hpp"
#include "oracles.hpp"

namespace scenarios {

/// CARS settings used by the shipped experiment configs.
inline cacherec::CarsConfig tuned_cars() {
  cacherec::CarsConfig cfg;
  cfg.lambda_init = cacherec::LambdaInit::kBias;
  return cfg;
}

/// K = 4, N = 1 instance with random similarities in [0, 1]; redrawn until
/// every row can reach q.
inline cacherec::OptimInputs tiny_instance(std::mt19937_64& rng, double a, double q,
                                           oracle::Mat* u_out = nullptr) {
  using namespace cacherec;
  for (;;) {
    const oracle::Mat u = oracle::random_similarity(4, rng);
    if (u.rowwise().maxCoeff().minCoeff() < q) continue;
    const oracle::Vec p0 = oracle::random_popularity(4, rng);
    const std::vector<Index> cached{Index(rng() % 4)};
    if (u_out) *u_out = u;
    return OptimInputs(SimilarityMatrix(Matrix(u)), RequestModel(PopularityVector(p0), a, 1),
                       CostVector::cache_indicator(4, cached), q);
  }
}

/// Synthetic catalog with Zipf popularity and a top-C cache.
inline cacherec::OptimInputs synthetic_instance(cacherec::Index k, int n, double mean_related,
                                                std::uint64_t seed, double zipf, double a, double q,
                                                cacherec::Index cache) {
  using namespace cacherec;
  SyntheticSimilaritySpec spec;
  spec.size = k;
  spec.mean_related = mean_related;
  spec.seed = seed;
  spec.min_related = n + 1;
  const SimilarityMatrix u = synthetic_similarity(spec);
  const PopularityVector p0 = zipf_popularity(k, zipf);
  const CachePlacement placement = top_c_cache(p0, cache);
  return OptimInputs(u, RequestModel(p0, a, n), placement.cost(), q);
}

}  // namespace scenarios
