#pragma once

// Builders for similarity and popularity inputs: MovieLens ratings through
// item-item collaborative filtering and cosine similarity, Last.fm
// similarity triplets, and synthetic generators.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cacherec/linalg.hpp"
#include "cacherec/request_model.hpp"

namespace cacherec {

struct Rating {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double value = 0.0;
};

class RatingsTable {
 public:
  /// Rejects duplicate (user, item) pairs and ratings outside the scale.
  explicit RatingsTable(std::vector<Rating> ratings, double min_rating = 0.5,
                        double max_rating = 5.0);

  const std::vector<Rating>& ratings() const noexcept { return ratings_; }
  std::size_t size() const noexcept { return ratings_.size(); }
  /// Sorted ascending.
  std::vector<std::int64_t> item_ids() const;
  std::vector<std::int64_t> user_ids() const;

 private:
  std::vector<Rating> ratings_;
};

/// `userId,movieId,rating,timestamp` with a header line.
RatingsTable read_movielens_csv(std::istream& in);
RatingsTable load_movielens_csv(const std::filesystem::path& path);

/// Items x users; NaN marks a missing rating.
struct RatingGrid {
  Matrix values;
  std::vector<std::int64_t> item_ids;
  std::vector<std::int64_t> user_ids;
};

RatingGrid to_grid(const RatingsTable& table);

/// Fills every missing rating with the similarity-weighted average of the
/// user's ratings on the k most similar items the user rated. Similarity is
/// the cosine over co-rated users of item-mean-centered ratings; only
/// positive similarities count. Without any, the item mean is used.
RatingGrid cf_fill(const RatingsTable& table, int k = 10);

/// Cosine similarity of item rows after subtracting each row's mean. Rows
/// with zero centered norm get similarity 0; the diagonal is 0.
Matrix cosine_similarity(const Matrix& ratings);

/// u_ij = 1 when s_ij > threshold, else 0; diagonal 0.
SimilarityMatrix binarize(const Matrix& scores, double threshold = 0.6);

/// max(s_ij, s_ji) elementwise.
Matrix symmetrize_max(const Matrix& scores);

/// Sparse undirected relation graph; adjacency lists are sorted.
struct RelationGraph {
  std::vector<std::vector<Index>> adjacency;

  Index size() const noexcept { return static_cast<Index>(adjacency.size()); }
  std::size_t edge_count() const;
  SimilarityMatrix to_similarity() const;
  static RelationGraph from_similarity(const SimilarityMatrix& u);
};

/// Fused cosine similarity and binarization in row blocks, for catalogs too
/// large for a dense K x K score matrix. Same edges as
/// binarize(cosine_similarity(ratings), threshold) up to rounding at the
/// threshold; the result is symmetric.
RelationGraph similarity_graph(const Matrix& ratings, double threshold = 0.6,
                               Index block_rows = 512);

struct PruneResult {
  SimilarityMatrix similarity;
  std::vector<Index> kept;        // new id -> old id
  std::vector<Index> old_to_new;  // -1 for removed
  int passes = 0;
};

/// Repeatedly removes contents whose row sum is <= N until none remain.
/// Throws DataError when everything is removed.
PruneResult prune(const SimilarityMatrix& u, int list_size);
PruneResult prune(const RelationGraph& graph, int list_size);

/// `idA<TAB>idB<TAB>score` lines. Any positive score becomes an undirected
/// edge; ids are sorted lexicographically to fix the content order.
struct TripletGraph {
  RelationGraph graph;
  std::vector<std::string> ids;
};
TripletGraph read_lastfm_triplets(std::istream& in);
TripletGraph load_lastfm_triplets(const std::filesystem::path& path);

struct SyntheticSimilaritySpec {
  Index size = 100;
  double mean_related = 4.0;
  std::uint64_t seed = 1;
  /// Every content gets at least this many related contents. Set to N + 1
  /// so the result survives pruning.
  int min_related = 0;

  enum class Method {
    kRegularTopUp,  // random min_related-regular base plus independent extra pairs
    kRedraw,        // independent pairs, redrawn until the minimum holds
  };
  Method method = Method::kRegularTopUp;
};

/// Symmetric binary matrix with mean row sum mean_related.
SimilarityMatrix synthetic_similarity(const SyntheticSimilaritySpec& spec);

/// p_j proportional to j^-s over ranks j = 1..K.
PopularityVector zipf_popularity(Index size, double exponent);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cacherec
