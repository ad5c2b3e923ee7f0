#include "cacherec/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cacherec/error.hpp"
#include "cacherec/matrix_io.hpp"
#include "cacherec/parallel.hpp"
#include "cacherec/rng.hpp"

namespace cacherec {
namespace {

using nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string session_label(const SessionLength& s) {
  std::ostringstream out;
  if (s.kind == SessionLength::Kind::kFixed) {
    out << "fixed:" << static_cast<long long>(s.value);
  } else {
    out << "geometric:" << format_double(s.value);
  }
  return out.str();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InvalidArgument("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

SessionLength parse_session_length(const json& j) {
  if (j.is_number_integer()) return SessionLength::fixed(j.get<int>());
  if (j.is_object() && j.size() == 1) {
    if (j.contains("fixed")) return SessionLength::fixed(j.at("fixed").get<int>());
    if (j.contains("geometric")) return SessionLength::geometric(j.at("geometric").get<double>());
  }
  throw InvalidArgument("config: sessionLength must be an integer, {\"fixed\": M} or {\"geometric\": mean}");
}

SubproblemSettings parse_subproblem(const json& j, SubproblemSettings s, const char* where) {
  reject_unknown(j, {"tol", "maxIter"}, where);
  read_if(j, "tol", s.tol);
  read_if(j, "maxIter", s.max_iter);
  return s;
}

CarsConfig parse_cars(const json& j) {
  reject_unknown(j, {"rho", "acc1", "acc2", "maxIter", "multiplierStep", "lambdaInit", "piStep", "yStep"},
                 "cars");
  CarsConfig c;
  read_if(j, "rho", c.rho);
  read_if(j, "acc1", c.acc1);
  read_if(j, "acc2", c.acc2);
  read_if(j, "maxIter", c.max_iter);
  if (j.contains("multiplierStep")) {
    const auto v = j.at("multiplierStep").get<std::string>();
    if (v == "halfRho") c.multiplier_step = MultiplierStep::kHalfRho;
    else if (v == "rho") c.multiplier_step = MultiplierStep::kRho;
    else throw InvalidArgument("config: cars.multiplierStep must be \"halfRho\" or \"rho\"");
  }
  if (j.contains("lambdaInit")) {
    const auto v = j.at("lambdaInit").get<std::string>();
    if (v == "zero") c.lambda_init = LambdaInit::kZero;
    else if (v == "bias") c.lambda_init = LambdaInit::kBias;
    else throw InvalidArgument("config: cars.lambdaInit must be \"zero\" or \"bias\"");
  }
  if (j.contains("piStep")) c.pi_step = parse_subproblem(j.at("piStep"), c.pi_step, "cars.piStep");
  if (j.contains("yStep")) c.y_step = parse_subproblem(j.at("yStep"), c.y_step, "cars.yStep");
  return c;
}

DatasetSpec parse_dataset(const json& j, const std::filesystem::path& base) {
  DatasetSpec d;
  const auto kind = j.at("kind").get<std::string>();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
  };
  if (kind == "synthetic") {
    reject_unknown(j, {"kind", "size", "meanRelated", "seed", "minRelated", "method"}, "dataset");
    d.kind = DatasetSpec::Kind::kSynthetic;
    read_if(j, "size", d.synthetic.size);
    read_if(j, "meanRelated", d.synthetic.mean_related);
    read_if(j, "seed", d.synthetic.seed);
    read_if(j, "minRelated", d.synthetic.min_related);
    if (j.contains("method")) {
      const auto m = j.at("method").get<std::string>();
      if (m == "regularTopUp") d.synthetic.method = SyntheticSimilaritySpec::Method::kRegularTopUp;
      else if (m == "redraw") d.synthetic.method = SyntheticSimilaritySpec::Method::kRedraw;
      else throw InvalidArgument("config: dataset.method must be \"regularTopUp\" or \"redraw\"");
    }
  } else if (kind == "movielens") {
    reject_unknown(j, {"kind", "path", "threshold", "cfNeighbors"}, "dataset");
    d.kind = DatasetSpec::Kind::kMovieLens;
    d.path = resolve(j.at("path").get<std::string>());
    read_if(j, "threshold", d.threshold);
    read_if(j, "cfNeighbors", d.cf_neighbors);
  } else if (kind == "lastfm") {
    reject_unknown(j, {"kind", "path"}, "dataset");
    d.kind = DatasetSpec::Kind::kLastfm;
    d.path = resolve(j.at("path").get<std::string>());
  } else if (kind == "prepared") {
    reject_unknown(j, {"kind", "path"}, "dataset");
    d.kind = DatasetSpec::Kind::kPrepared;
    d.path = resolve(j.at("path").get<std::string>());
  } else {
    throw InvalidArgument("config: unknown dataset kind '" + kind + "'");
  }
  return d;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string number_or_empty(double v) { return std::isnan(v) ? std::string() : format_double(v); }

}  // namespace

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::kNoRec:
      return "norec";
    case Policy::kMyopic:
      return "myopic";
    case Policy::kCars:
      return "cars";
  }
  return "unknown";
}

Policy parse_policy(const std::string& name) {
  if (name == "norec") return Policy::kNoRec;
  if (name == "myopic") return Policy::kMyopic;
  if (name == "cars") return Policy::kCars;
  throw InvalidArgument("unknown policy '" + name + "' (expected norec, myopic or cars)");
}

std::string DatasetSpec::label() const {
  switch (kind) {
    case Kind::kMovieLens:
      return "movielens";
    case Kind::kLastfm:
      return "lastfm";
    case Kind::kPrepared:
      return "prepared:" + path.filename().string();
    case Kind::kSynthetic:
      break;
  }
  return "synthetic";
}

void ScenarioConfig::validate() const {
  auto nonempty = [](const auto& v, const char* name) {
    if (v.empty()) throw InvalidArgument(std::string("config: sweep.") + name + " must be nonempty");
  };
  nonempty(sweep.quality, "q");
  nonempty(sweep.cache_fraction, "cacheFraction");
  nonempty(sweep.follow_prob, "a");
  nonempty(sweep.list_size, "N");
  nonempty(sweep.zipf, "zipf");
  for (double q : sweep.quality) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("config: every q must lie in [0, 1]");
  }
  for (double f : sweep.cache_fraction) {
    if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("config: every cacheFraction must lie in (0, 1]");
  }
  for (double a : sweep.follow_prob) {
    if (!(a >= 0.0 && a < 1.0)) throw InvalidArgument("config: every a must lie in [0, 1)");
  }
  for (int n : sweep.list_size) {
    if (n < 1) throw InvalidArgument("config: every N must be >= 1");
  }
  for (double s : sweep.zipf) {
    if (!(s >= 0.0)) throw InvalidArgument("config: every zipf exponent must be >= 0");
  }
  if (sweep.replicates < 1) throw InvalidArgument("config: sweep.replicates must be >= 1");
  if (policies.empty()) throw InvalidArgument("config: policies must be nonempty");
  if (threads < 1) throw InvalidArgument("config: threads must be >= 1");
  cars.validate();
  session.validate();
  for (const auto& len : sweep.session_length) {
    SessionConfig probe = session;
    probe.session_length = len;
    probe.validate();
  }
}

ScenarioConfig parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  try {
    reject_unknown(j, {"name", "dataset", "sweep", "policies", "cars", "session", "simulate",
                       "recordTiming", "outputDir", "threads"},
                   "scenario");
    ScenarioConfig c;
    read_if(j, "name", c.name);
    if (j.contains("dataset")) c.dataset = parse_dataset(j.at("dataset"), base_dir);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      reject_unknown(s, {"q", "cacheFraction", "a", "N", "zipf", "sessionLength", "replicates"}, "sweep");
      read_if(s, "q", c.sweep.quality);
      read_if(s, "cacheFraction", c.sweep.cache_fraction);
      read_if(s, "a", c.sweep.follow_prob);
      read_if(s, "N", c.sweep.list_size);
      read_if(s, "zipf", c.sweep.zipf);
      read_if(s, "replicates", c.sweep.replicates);
      if (s.contains("sessionLength")) {
        for (const auto& e : s.at("sessionLength")) c.sweep.session_length.push_back(parse_session_length(e));
      }
    }
    if (j.contains("policies")) {
      c.policies.clear();
      for (const auto& p : j.at("policies")) c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    if (j.contains("cars")) c.cars = parse_cars(j.at("cars"));
    if (j.contains("session")) {
      const json& s = j.at("session");
      reject_unknown(s, {"totalRequests", "sessionLength", "seed"}, "session");
      read_if(s, "totalRequests", c.session.total_requests);
      read_if(s, "seed", c.session.seed);
      if (s.contains("sessionLength")) c.session.session_length = parse_session_length(s.at("sessionLength"));
    }
    read_if(j, "simulate", c.simulate);
    read_if(j, "recordTiming", c.record_timing);
    if (j.contains("outputDir")) {
      std::filesystem::path out(j.at("outputDir").get<std::string>());
      c.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
    }
    read_if(j, "threads", c.threads);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path.parent_path());
}

std::vector<GridPoint> expand_grid(const ScenarioConfig& cfg) {
  const std::vector<SessionLength> lengths =
      cfg.sweep.session_length.empty() ? std::vector<SessionLength>{cfg.session.session_length}
                                       : cfg.sweep.session_length;
  std::vector<GridPoint> grid;
  for (int n : cfg.sweep.list_size)
    for (double s : cfg.sweep.zipf)
      for (double a : cfg.sweep.follow_prob)
        for (double q : cfg.sweep.quality)
          for (double f : cfg.sweep.cache_fraction)
            for (const auto& len : lengths)
              for (int r = 0; r < cfg.sweep.replicates; ++r) {
                grid.push_back({grid.size(), n, s, a, q, f, len, r});
              }
  return grid;
}

Index cache_size_for(double fraction, Index catalog_size) {
  const auto c = static_cast<Index>(std::lround(fraction * static_cast<double>(catalog_size)));
  return std::clamp<Index>(c, 1, catalog_size);
}

struct DatasetCache::Impl {
  DatasetSpec spec;
  std::mutex mutex;
  std::optional<RelationGraph> base;
  std::map<int, SimilarityMatrix> pruned;
};

DatasetCache::DatasetCache(DatasetSpec spec) : impl_(std::make_shared<Impl>()) {
  impl_->spec = std::move(spec);
}

const SimilarityMatrix& DatasetCache::similarity(int list_size) {
  std::lock_guard lock(impl_->mutex);
  if (auto it = impl_->pruned.find(list_size); it != impl_->pruned.end()) return it->second;
  const DatasetSpec& spec = impl_->spec;
  if (spec.kind == DatasetSpec::Kind::kSynthetic) {
    SyntheticSimilaritySpec s = spec.synthetic;
    s.min_related = std::max(s.min_related, list_size + 1);
    SimilarityMatrix u = prune(synthetic_similarity(s), list_size).similarity;
    return impl_->pruned.emplace(list_size, std::move(u)).first->second;
  }
  if (!impl_->base) {
    switch (spec.kind) {
      case DatasetSpec::Kind::kMovieLens: {
        const RatingGrid filled = cf_fill(load_movielens_csv(spec.path), spec.cf_neighbors);
        impl_->base = similarity_graph(filled.values, spec.threshold);
        break;
      }
      case DatasetSpec::Kind::kLastfm:
        impl_->base = load_lastfm_triplets(spec.path).graph;
        break;
      case DatasetSpec::Kind::kPrepared:
        impl_->base = RelationGraph::from_similarity(load_prepared(spec.path));
        break;
      case DatasetSpec::Kind::kSynthetic:
        break;
    }
  }
  SimilarityMatrix u = prune(*impl_->base, list_size).similarity;
  return impl_->pruned.emplace(list_size, std::move(u)).first->second;
}

ScenarioInputs build_inputs(const ScenarioConfig& cfg, const GridPoint& point, DatasetCache& data) {
  const SimilarityMatrix& u = data.similarity(point.list_size);
  PopularityVector p0 = zipf_popularity(u.size(), point.zipf);
  CachePlacement cache = top_c_cache(p0, cache_size_for(point.cache_fraction, u.size()));
  return {u, std::move(p0), std::move(cache), cfg.dataset.label()};
}

namespace {

ResultRow run_policy(const ScenarioConfig& cfg, const GridPoint& point, const ScenarioInputs& in,
                     Policy policy, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  ResultRow row;
  row.point = point;
  row.dataset = in.dataset;
  row.catalog_size = in.similarity.size();
  row.cache_size = in.cache.capacity();
  row.policy = policy;
  row.seed = seed;
  row.empirical_chr = row.mean_quality = row.min_row_quality = kNaN;

  const int n = point.list_size;
  const RequestModel model(in.popularity, policy == Policy::kNoRec ? 0.0 : point.follow_prob, n);
  const auto start = clock::now();
  std::optional<RecMatrix> y;
  if (policy == Policy::kNoRec) {
    double hit = 0.0;
    for (Index j : in.cache.cached()) hit += in.popularity.values()[j];
    row.analytic_chr = std::min(hit, 1.0);
  } else {
    const OptimInputs opt(in.similarity, model, in.cache.cost(), point.quality);
    if (policy == Policy::kMyopic) {
      y = myopic_solve(opt);
    } else {
      CarsResult r = cars_solve(opt, cfg.cars);
      row.iterations = r.iterations;
      row.converged = r.converged;
      if (!r.failure.empty()) row.error = "cars: " + r.failure;
      y = std::move(r.best_y);
    }
    row.analytic_chr = cache_hit_ratio(*y, model, in.cache.cached());
    row.min_row_quality = quality_of(*y, in.similarity).minCoeff();
  }
  row.wall_millis =
      cfg.record_timing ? std::chrono::duration<double, std::milli>(clock::now() - start).count() : 0.0;

  if (cfg.simulate) {
    SessionConfig session = cfg.session;
    session.session_length = point.session_length;
    session.seed = seed;
    const RecMatrix sim_y = y ? *y : top_similarity_rec(in.similarity, n);
    const SimMetrics m = simulate(sim_y, model, in.cache, in.similarity, session);
    row.empirical_chr = m.empirical_chr();
    row.requests = m.requests;
    if (m.followed > 0) row.mean_quality = m.mean_quality_served();
  }
  return row;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::vector<GridPoint> grid = expand_grid(cfg);
  DatasetCache data(cfg.dataset);
  std::vector<std::vector<ResultRow>> per_point(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t g) {
    const GridPoint& point = grid[g];
    const std::uint64_t seed = derive_seed(cfg.session.seed, point.index);
    std::optional<ScenarioInputs> in;
    std::string setup_error;
    try {
      in = build_inputs(cfg, point, data);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (Policy policy : cfg.policies) {
      ResultRow row;
      try {
        if (!in) throw DataError(setup_error);
        row = run_policy(cfg, point, *in, policy, seed);
      } catch (const std::exception& e) {
        row = ResultRow{};
        row.point = point;
        row.dataset = cfg.dataset.label();
        row.policy = policy;
        row.seed = seed;
        row.analytic_chr = row.empirical_chr = row.mean_quality = row.min_row_quality = kNaN;
        row.converged = false;
        row.error = e.what();
      }
      per_point[g].push_back(std::move(row));
    }
  });
  std::vector<ResultRow> rows;
  for (auto& block : per_point) {
    for (auto& r : block) rows.push_back(std::move(r));
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "schema_version,grid_index,dataset,K,N,zipf_s,a,q,cache_fraction,cache_size,session_length,"
         "replicate,policy,analytic_chr,empirical_chr,mean_quality,min_row_quality,iterations,"
         "converged,wall_millis,seed,requests,error\n";
  for (const auto& r : rows) {
    const GridPoint& p = r.point;
    out << kResultSchemaVersion << ',' << p.index << ',' << csv_field(r.dataset) << ',' << r.catalog_size
        << ',' << p.list_size << ',' << format_double(p.zipf) << ',' << format_double(p.follow_prob) << ','
        << format_double(p.quality) << ',' << format_double(p.cache_fraction) << ',' << r.cache_size << ','
        << session_label(p.session_length) << ',' << p.replicate << ',' << to_string(r.policy) << ','
        << number_or_empty(r.analytic_chr) << ',' << number_or_empty(r.empirical_chr) << ','
        << number_or_empty(r.mean_quality) << ',' << number_or_empty(r.min_row_quality) << ','
        << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << format_double(std::round(r.wall_millis * 1000.0) / 1000.0)
        << ',' << r.seed << ',' << r.requests << ',' << csv_field(r.error) << '\n';
  }
}

CarsResult emit_convergence_trace(const ScenarioConfig& cfg, std::ostream& out) {
  cfg.validate();
  const GridPoint point = expand_grid(cfg).front();
  DatasetCache data(cfg.dataset);
  const ScenarioInputs in = build_inputs(cfg, point, data);
  const RequestModel model(in.popularity, point.follow_prob, point.list_size);
  const OptimInputs opt(in.similarity, model, in.cache.cost(), point.quality);
  CarsResult r = cars_solve(opt, cfg.cars);
  write_cars_trace(out, r);
  return r;
}

PreparedDataset prepare_movielens(const std::filesystem::path& csv, int list_size, double threshold,
                                  int cf_neighbors) {
  const RatingsTable table = load_movielens_csv(csv);
  const RatingGrid filled = cf_fill(table, cf_neighbors);
  const RelationGraph graph = similarity_graph(filled.values, threshold);
  PruneResult pr = prune(graph, list_size);
  PreparedDataset d{std::move(pr.similarity), {}, {}};
  for (Index old : pr.kept) d.ids.push_back(std::to_string(filled.item_ids[std::size_t(old)]));
  d.provenance = {"movielens", csv.string(), sha256_file(csv), threshold, cf_neighbors, list_size,
                  pr.passes, graph.size(), d.similarity.size(), 0};
  d.provenance.relations = RelationGraph::from_similarity(d.similarity).edge_count();
  return d;
}

PreparedDataset prepare_lastfm(const std::filesystem::path& triplets, int list_size) {
  const TripletGraph t = load_lastfm_triplets(triplets);
  PruneResult pr = prune(t.graph, list_size);
  PreparedDataset d{std::move(pr.similarity), {}, {}};
  for (Index old : pr.kept) d.ids.push_back(t.ids[std::size_t(old)]);
  d.provenance = {"lastfm", triplets.string(), sha256_file(triplets), 0.0, 0, list_size,
                  pr.passes, t.graph.size(), d.similarity.size(), 0};
  d.provenance.relations = RelationGraph::from_similarity(d.similarity).edge_count();
  return d;
}

void write_prepared(const std::filesystem::path& dir, const PreparedDataset& data) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "similarity.txt", data.similarity.values());
  {
    std::ofstream ids(dir / "ids.txt");
    for (const auto& id : data.ids) ids << id << '\n';
    if (!ids) throw DataError("cannot write " + (dir / "ids.txt").string());
  }
  const Provenance& p = data.provenance;
  json j = {{"kind", p.kind},
            {"source", p.source},
            {"sourceSha256", p.source_sha256},
            {"threshold", p.threshold},
            {"cfNeighbors", p.cf_neighbors},
            {"N", p.list_size},
            {"prunePasses", p.prune_passes},
            {"inputSize", p.input_size},
            {"K", p.size},
            {"relations", p.relations}};
  std::ofstream out(dir / "provenance.json");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / "provenance.json").string());
}

SimilarityMatrix load_prepared(const std::filesystem::path& dir) {
  return SimilarityMatrix(load_matrix(dir / "similarity.txt"));
}

}  // namespace cacherec
