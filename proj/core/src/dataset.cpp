#include "cacherec/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "cacherec/error.hpp"
#include "cacherec/rng.hpp"

namespace cacherec {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class Id>
std::map<Id, Index> index_of(const std::vector<Id>& ids) {
  std::map<Id, Index> out;
  for (std::size_t k = 0; k < ids.size(); ++k) out.emplace(ids[k], static_cast<Index>(k));
  return out;
}

Matrix center_rows(const Matrix& m) {
  Matrix c = m;
  for (Index i = 0; i < c.rows(); ++i) c.row(i).array() -= c.row(i).mean();
  return c;
}

// Shared fixpoint: `sums` are current row sums, `neighbors(i, f)` calls
// f(j, u_ij) for the row's nonzeros.
template <class Neighbors>
std::pair<std::vector<char>, int> prune_fixpoint(std::vector<double> sums, int list_size,
                                                 Neighbors&& neighbors) {
  const std::size_t k = sums.size();
  std::vector<char> alive(k, 1);
  int passes = 0;
  for (;;) {
    std::vector<std::size_t> drop;
    for (std::size_t i = 0; i < k; ++i) {
      if (alive[i] && sums[i] <= list_size) drop.push_back(i);
    }
    if (drop.empty()) break;
    ++passes;
    for (std::size_t i : drop) alive[i] = 0;
    for (std::size_t i : drop) {
      neighbors(i, [&](std::size_t j, double w) {
        if (alive[j]) sums[j] -= w;
      });
    }
  }
  return {std::move(alive), passes};
}

PruneResult finish_prune(const std::vector<char>& alive, int passes,
                         const std::function<double(Index, Index)>& entry) {
  PruneResult r{SimilarityMatrix(Matrix::Zero(0, 0)), {}, {}, passes};
  r.old_to_new.assign(alive.size(), -1);
  for (std::size_t i = 0; i < alive.size(); ++i) {
    if (alive[i]) {
      r.old_to_new[i] = static_cast<Index>(r.kept.size());
      r.kept.push_back(static_cast<Index>(i));
    }
  }
  if (r.kept.empty()) throw DataError("pruning removed every content");
  const Index k = static_cast<Index>(r.kept.size());
  Matrix u(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) u(a, b) = entry(r.kept[std::size_t(a)], r.kept[std::size_t(b)]);
  }
  r.similarity = SimilarityMatrix(std::move(u));
  return r;
}

}  // namespace

RatingsTable::RatingsTable(std::vector<Rating> ratings, double min_rating, double max_rating)
    : ratings_(std::move(ratings)) {
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  for (const auto& r : ratings_) {
    if (!(r.value >= min_rating && r.value <= max_rating)) {
      throw DataError("rating " + std::to_string(r.value) + " outside [" + std::to_string(min_rating) +
                      ", " + std::to_string(max_rating) + "]");
    }
    if (!seen.emplace(r.user, r.item).second) {
      throw DataError("duplicate rating for user " + std::to_string(r.user) + ", item " +
                      std::to_string(r.item));
    }
  }
}

std::vector<std::int64_t> RatingsTable::item_ids() const {
  std::vector<std::int64_t> ids;
  for (const auto& r : ratings_) ids.push_back(r.item);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<std::int64_t> RatingsTable::user_ids() const {
  std::vector<std::int64_t> ids;
  for (const auto& r : ratings_) ids.push_back(r.user);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

RatingsTable read_movielens_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("MovieLens CSV is empty");
  std::vector<Rating> ratings;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() < 3) throw DataError("line " + std::to_string(number) + ": expected 4 fields");
    ratings.push_back({parse_number<std::int64_t>(fields[0], number, "userId"),
                       parse_number<std::int64_t>(fields[1], number, "movieId"),
                       parse_number<double>(fields[2], number, "rating")});
  }
  if (ratings.empty()) throw DataError("MovieLens CSV has no ratings");
  return RatingsTable(std::move(ratings));
}

RatingsTable load_movielens_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_movielens_csv(in);
}

RatingGrid to_grid(const RatingsTable& table) {
  if (table.size() == 0) throw DataError("ratings table is empty");
  RatingGrid g;
  g.item_ids = table.item_ids();
  g.user_ids = table.user_ids();
  const auto items = index_of(g.item_ids);
  const auto users = index_of(g.user_ids);
  g.values = Matrix::Constant(static_cast<Index>(g.item_ids.size()),
                              static_cast<Index>(g.user_ids.size()), kNaN);
  for (const auto& r : table.ratings()) g.values(items.at(r.item), users.at(r.user)) = r.value;
  return g;
}

RatingGrid cf_fill(const RatingsTable& table, int k) {
  if (k < 1) throw InvalidArgument("cf_fill: k must be >= 1");
  RatingGrid g = to_grid(table);
  const Index ni = g.values.rows();
  const Index nu = g.values.cols();

  struct Entry {
    Index other;
    double centered;
  };
  std::vector<std::vector<Entry>> by_item(static_cast<std::size_t>(ni));
  std::vector<std::vector<Entry>> by_user(static_cast<std::size_t>(nu));
  Vector mean = Vector::Zero(ni);
  for (Index i = 0; i < ni; ++i) {
    double sum = 0.0;
    int count = 0;
    for (Index n = 0; n < nu; ++n) {
      if (!std::isnan(g.values(i, n))) {
        sum += g.values(i, n);
        ++count;
      }
    }
    mean[i] = sum / count;
    for (Index n = 0; n < nu; ++n) {
      if (std::isnan(g.values(i, n))) continue;
      const double c = g.values(i, n) - mean[i];
      by_item[std::size_t(i)].push_back({n, c});
      by_user[std::size_t(n)].push_back({i, c});
    }
  }

  // Co-rated accumulators for one target item at a time.
  Vector dot = Vector::Zero(ni), norm_i = Vector::Zero(ni), norm_j = Vector::Zero(ni);
  std::vector<Index> touched;
  std::vector<char> is_touched(static_cast<std::size_t>(ni), 0);
  std::vector<char> rated(static_cast<std::size_t>(nu), 0);
  std::vector<std::pair<double, Index>> candidates;
  Matrix filled = g.values;

  for (Index i = 0; i < ni; ++i) {
    for (const auto& [n, ci] : by_item[std::size_t(i)]) {
      rated[std::size_t(n)] = 1;
      for (const auto& [j, cj] : by_user[std::size_t(n)]) {
        if (!is_touched[std::size_t(j)]) {
          is_touched[std::size_t(j)] = 1;
          touched.push_back(j);
        }
        dot[j] += ci * cj;
        norm_i[j] += ci * ci;
        norm_j[j] += cj * cj;
      }
    }
    for (Index n = 0; n < nu; ++n) {
      if (rated[std::size_t(n)]) continue;
      candidates.clear();
      for (const auto& [j, cj] : by_user[std::size_t(n)]) {
        if (!is_touched[std::size_t(j)] || j == i) continue;
        const double denom = std::sqrt(norm_i[j] * norm_j[j]);
        if (!(denom > 0.0)) continue;
        const double s = dot[j] / denom;
        if (s > 0.0) candidates.emplace_back(s, j);
      }
      const std::size_t take = std::min<std::size_t>(candidates.size(), std::size_t(k));
      std::partial_sort(candidates.begin(), candidates.begin() + std::ptrdiff_t(take), candidates.end(),
                        [](const auto& x, const auto& y) {
                          return x.first > y.first || (x.first == y.first && x.second < y.second);
                        });
      double weight = 0.0, acc = 0.0;
      for (std::size_t c = 0; c < take; ++c) {
        weight += candidates[c].first;
        acc += candidates[c].first * g.values(candidates[c].second, n);
      }
      filled(i, n) = weight > 0.0 ? acc / weight : mean[i];
    }
    for (Index j : touched) {
      dot[j] = norm_i[j] = norm_j[j] = 0.0;
      is_touched[std::size_t(j)] = 0;
    }
    touched.clear();
    for (const auto& e : by_item[std::size_t(i)]) rated[std::size_t(e.other)] = 0;
  }
  g.values = std::move(filled);
  return g;
}

Matrix cosine_similarity(const Matrix& ratings) {
  if (!ratings.allFinite()) throw InvalidArgument("cosine_similarity: ratings must be complete");
  const Matrix c = center_rows(ratings);
  const Vector norms = c.rowwise().norm();
  Matrix s = c * c.transpose();
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      const double d = norms[i] * norms[j];
      s(i, j) = (i == j || !(d > 0.0)) ? 0.0 : std::clamp(s(i, j) / d, -1.0, 1.0);
    }
  }
  return s;
}

SimilarityMatrix binarize(const Matrix& scores, double threshold) {
  if (scores.rows() != scores.cols()) throw DimensionError("binarize: scores must be square");
  Matrix u = (scores.array() > threshold).cast<double>();
  u.diagonal().setZero();
  return SimilarityMatrix(std::move(u));
}

Matrix symmetrize_max(const Matrix& scores) {
  if (scores.rows() != scores.cols()) throw DimensionError("symmetrize_max: scores must be square");
  return scores.cwiseMax(scores.transpose());
}

std::size_t RelationGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& a : adjacency) total += a.size();
  return total / 2;
}

SimilarityMatrix RelationGraph::to_similarity() const {
  Matrix u = Matrix::Zero(size(), size());
  for (Index i = 0; i < size(); ++i) {
    for (Index j : adjacency[std::size_t(i)]) u(i, j) = 1.0;
  }
  return SimilarityMatrix(std::move(u));
}

RelationGraph RelationGraph::from_similarity(const SimilarityMatrix& u) {
  RelationGraph g;
  g.adjacency.resize(static_cast<std::size_t>(u.size()));
  for (Index i = 0; i < u.size(); ++i) {
    for (Index j = 0; j < u.size(); ++j) {
      if (u(i, j) > 0.0 || u(j, i) > 0.0) g.adjacency[std::size_t(i)].push_back(j);
    }
  }
  return g;
}

RelationGraph similarity_graph(const Matrix& ratings, double threshold, Index block_rows) {
  if (!ratings.allFinite()) throw InvalidArgument("similarity_graph: ratings must be complete");
  if (block_rows < 1) throw InvalidArgument("similarity_graph: block size must be positive");
  const Matrix c = center_rows(ratings);
  const Vector norms = c.rowwise().norm();
  const Index k = c.rows();
  RelationGraph g;
  g.adjacency.resize(static_cast<std::size_t>(k));
  for (Index start = 0; start < k; start += block_rows) {
    const Index rows = std::min(block_rows, k - start);
    const Matrix block = c.middleRows(start, rows) * c.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      for (Index j = 0; j < k; ++j) {
        const double d = norms[i] * norms[j];
        if (i == j || !(d > 0.0)) continue;
        if (std::clamp(block(r, j) / d, -1.0, 1.0) > threshold) g.adjacency[std::size_t(i)].push_back(j);
      }
    }
  }
  // Rounding can make the two directions disagree at the threshold.
  std::vector<std::vector<Index>> sym(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    for (Index j : g.adjacency[std::size_t(i)]) {
      sym[std::size_t(i)].push_back(j);
      sym[std::size_t(j)].push_back(i);
    }
  }
  for (auto& a : sym) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  g.adjacency = std::move(sym);
  return g;
}

PruneResult prune(const SimilarityMatrix& u, int list_size) {
  const Matrix& m = u.values();
  const Index k = m.rows();
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) sums[std::size_t(i)] = m.row(i).sum();
  auto [alive, passes] = prune_fixpoint(std::move(sums), list_size, [&](std::size_t i, auto&& f) {
    for (Index j = 0; j < k; ++j) {
      if (m(j, Index(i)) != 0.0) f(std::size_t(j), m(j, Index(i)));
    }
  });
  return finish_prune(alive, passes, [&](Index a, Index b) { return m(a, b); });
}

PruneResult prune(const RelationGraph& graph, int list_size) {
  std::vector<double> sums(graph.adjacency.size());
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] = static_cast<double>(graph.adjacency[i].size());
  auto [alive, passes] = prune_fixpoint(std::move(sums), list_size, [&](std::size_t i, auto&& f) {
    for (Index j : graph.adjacency[i]) f(std::size_t(j), 1.0);
  });
  return finish_prune(alive, passes, [&](Index a, Index b) {
    const auto& adj = graph.adjacency[std::size_t(a)];
    return std::binary_search(adj.begin(), adj.end(), b) ? 1.0 : 0.0;
  });
}

TripletGraph read_lastfm_triplets(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::set<std::string> names;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view, '\t');
    if (fields.size() != 3) throw DataError("line " + std::to_string(number) + ": expected 3 tab-separated fields");
    const std::string a(trim(fields[0]));
    const std::string b(trim(fields[1]));
    const double score = parse_number<double>(fields[2], number, "score");
    names.insert(a);
    names.insert(b);
    if (score > 0.0 && a != b) edges.emplace_back(a, b);
  }
  if (names.empty()) throw DataError("triplet file has no entries");
  TripletGraph t;
  t.ids.assign(names.begin(), names.end());
  const auto index = index_of(t.ids);
  t.graph.adjacency.resize(t.ids.size());
  for (const auto& [a, b] : edges) {
    const Index ia = index.at(a), ib = index.at(b);
    t.graph.adjacency[std::size_t(ia)].push_back(ib);
    t.graph.adjacency[std::size_t(ib)].push_back(ia);
  }
  for (auto& adj : t.graph.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  return t;
}

TripletGraph load_lastfm_triplets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_lastfm_triplets(in);
}

SimilarityMatrix synthetic_similarity(const SyntheticSimilaritySpec& spec) {
  const Index k = spec.size;
  const double mean = spec.mean_related;
  if (k < 2) throw InvalidArgument("synthetic: size must be >= 2");
  if (!(mean >= 0.0) || mean > double(k - 1)) {
    throw InvalidArgument("synthetic: mean related count must lie in [0, K-1]");
  }
  if (spec.min_related < 0 || spec.min_related > k - 1) {
    throw InvalidArgument("synthetic: min_related must lie in [0, K-1]");
  }
  Matrix u = Matrix::Zero(k, k);
  const int d = spec.min_related;

  if (spec.method == SyntheticSimilaritySpec::Method::kRedraw) {
    const double p = mean / double(k - 1);
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
      Rng rng(derive_seed(spec.seed, draw));
      u.setZero();
      for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) {
          if (rng.bernoulli(p)) u(i, j) = u(j, i) = 1.0;
        }
      }
      if (u.rowwise().sum().minCoeff() >= d) return SimilarityMatrix(std::move(u));
    }
    throw DataError("synthetic: no draw in 100 reached " + std::to_string(d) +
                    " related contents per row");
  }

  if (mean < d) throw InvalidArgument("synthetic: mean related count below min_related");
  Rng rng(derive_seed(spec.seed, 0));
  if (d > 0) {
    // Configuration model: shuffle degree stubs, pair neighbors, restart on
    // loops or repeated pairs.
    std::vector<Index> stubs;
    for (Index i = 0; i < k; ++i) stubs.insert(stubs.end(), std::size_t(d), i);
    if (stubs.size() % 2) stubs.push_back(0);
    bool done = false;
    for (int attempt = 0; attempt < 100000 && !done; ++attempt) {
      for (std::size_t s = stubs.size(); s > 1; --s) std::swap(stubs[s - 1], stubs[rng.below(s)]);
      u.setZero();
      done = true;
      for (std::size_t s = 0; s + 1 < stubs.size(); s += 2) {
        const Index a = stubs[s], b = stubs[s + 1];
        if (a == b || u(a, b) != 0.0) {
          done = false;
          break;
        }
        u(a, b) = u(b, a) = 1.0;
      }
    }
    if (!done) throw DataError("synthetic: could not build a regular base graph");
  }
  const double remaining = double(k - 1 - d);
  const double p = remaining > 0.0 ? std::min(1.0, (mean - d) / remaining) : 0.0;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      if (u(i, j) == 0.0 && rng.bernoulli(p)) u(i, j) = u(j, i) = 1.0;
    }
  }
  return SimilarityMatrix(std::move(u));
}

PopularityVector zipf_popularity(Index size, double exponent) {
  if (size < 1) throw InvalidArgument("zipf: size must be positive");
  if (!(exponent >= 0.0)) throw InvalidArgument("zipf: exponent must be >= 0");
  Vector w(size);
  for (Index j = 0; j < size; ++j) w[j] = std::pow(double(j + 1), -exponent);
  return PopularityVector::normalized(w);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialization failed");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), std::streamsize(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), std::size_t(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int b = 0; b < length; ++b) {
    out.push_back(kHex[digest[b] >> 4]);
    out.push_back(kHex[digest[b] & 15]);
  }
  return out;
}

}  // namespace cacherec
