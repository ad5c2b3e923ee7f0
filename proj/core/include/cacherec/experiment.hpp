#pragma once

// Parameter sweeps over NoRec, Myopic and CARS with analytic and simulated
// cache hit ratios, written as tidy CSV.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cacherec/dataset.hpp"
#include "cacherec/optim.hpp"
#include "cacherec/simulator.hpp"

namespace cacherec {

inline constexpr int kResultSchemaVersion = 1;

enum class Policy { kNoRec, kMyopic, kCars };

const char* to_string(Policy policy);
Policy parse_policy(const std::string& name);

struct DatasetSpec {
  enum class Kind { kMovieLens, kLastfm, kSynthetic, kPrepared };
  Kind kind = Kind::kSynthetic;
  std::filesystem::path path;  // ratings CSV, triplet file or prepared directory
  double threshold = 0.6;      // MovieLens binarization
  int cf_neighbors = 10;
  SyntheticSimilaritySpec synthetic{};

  std::string label() const;
};

struct Sweep {
  std::vector<double> quality{0.8};
  std::vector<double> cache_fraction{0.05};
  std::vector<double> follow_prob{0.8};
  std::vector<int> list_size{4};
  std::vector<double> zipf{0.8};
  std::vector<SessionLength> session_length;  // empty: the session config's length
  int replicates = 1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  DatasetSpec dataset{};
  Sweep sweep{};
  std::vector<Policy> policies{Policy::kNoRec, Policy::kMyopic, Policy::kCars};
  CarsConfig cars{};
  SessionConfig session{};
  bool simulate = true;
  /// When false, wall_millis is written as 0 so reruns are byte-identical.
  bool record_timing = true;
  std::filesystem::path output_dir = "results";
  int threads = 1;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// JSON keys mirror the field names in camelCase. Relative dataset paths are
/// resolved against `base_dir`.
ScenarioConfig parse_scenario(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct GridPoint {
  std::size_t index = 0;
  int list_size = 4;
  double zipf = 0.8;
  double follow_prob = 0.8;
  double quality = 0.8;
  double cache_fraction = 0.05;
  SessionLength session_length{};
  int replicate = 0;
};

std::vector<GridPoint> expand_grid(const ScenarioConfig& cfg);

/// C = round(fraction * K), at least 1.
Index cache_size_for(double fraction, Index catalog_size);

struct ResultRow {
  GridPoint point{};
  std::string dataset;
  Index catalog_size = 0;
  Index cache_size = 0;
  Policy policy = Policy::kNoRec;
  double analytic_chr = 0.0;
  double empirical_chr = 0.0;       // NaN when not simulated
  double mean_quality = 0.0;        // served quality over followed steps, NaN if none
  double min_row_quality = 0.0;     // min_i sum_j y_ij u_ij, NaN for NoRec
  int iterations = 0;
  bool converged = true;
  double wall_millis = 0.0;
  std::uint64_t seed = 0;
  std::int64_t requests = 0;
  std::string error;
};

/// Inputs for one grid point after dataset loading and pruning.
struct ScenarioInputs {
  SimilarityMatrix similarity;
  PopularityVector popularity;
  CachePlacement cache;
  std::string dataset;
};

/// Loads, preprocesses and prunes datasets once per list size.
class DatasetCache {
 public:
  explicit DatasetCache(DatasetSpec spec);
  /// Thread-safe; the result is built on first use.
  const SimilarityMatrix& similarity(int list_size);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

ScenarioInputs build_inputs(const ScenarioConfig& cfg, const GridPoint& point, DatasetCache& data);

/// Per-point failures land in the error column; other points still run.
std::vector<ResultRow> run_experiment(const ScenarioConfig& cfg);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

/// CARS iteration trace for the first grid point.
CarsResult emit_convergence_trace(const ScenarioConfig& cfg, std::ostream& out);

struct Provenance {
  std::string kind;  // "movielens" or "lastfm"
  std::string source;
  std::string source_sha256;
  double threshold = 0.0;
  int cf_neighbors = 0;
  int list_size = 0;
  int prune_passes = 0;
  Index input_size = 0;  // contents before pruning
  Index size = 0;        // contents after pruning
  std::size_t relations = 0;
};

struct PreparedDataset {
  SimilarityMatrix similarity;
  std::vector<std::string> ids;  // original content ids, one per row
  Provenance provenance;
};

PreparedDataset prepare_movielens(const std::filesystem::path& csv, int list_size,
                                  double threshold = 0.6, int cf_neighbors = 10);
PreparedDataset prepare_lastfm(const std::filesystem::path& triplets, int list_size);

/// similarity.txt (triplet format), ids.txt and provenance.json.
void write_prepared(const std::filesystem::path& dir, const PreparedDataset& data);
SimilarityMatrix load_prepared(const std::filesystem::path& dir);

}  // namespace cacherec
