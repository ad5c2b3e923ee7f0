#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cacherec/error.hpp"
#include "cacherec/experiment.hpp"

namespace fs = std::filesystem;
using namespace cacherec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

std::vector<Policy> split_policies(const std::string& list) {
  std::vector<Policy> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_policy(item));
  }
  if (out.empty()) throw InvalidArgument("--policies must name at least one policy");
  return out;
}

std::optional<int> env_threads() {
  const char* v = std::getenv("CARS_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("CARS_THREADS is not an integer: ") + v);
  }
}

struct RunArgs {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policies;
  std::optional<int> threads;
};

int do_run(const RunArgs& args) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(args.config);
    if (args.out) cfg.output_dir = *args.out;
    if (args.seed) cfg.session.seed = *args.seed;
    if (args.policies) cfg.policies = split_policies(*args.policies);
    if (args.threads) {
      cfg.threads = *args.threads;
    } else if (auto t = env_threads()) {
      cfg.threads = *t;
    }
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::vector<ResultRow> rows = run_experiment(cfg);
  fs::create_directories(cfg.output_dir);
  const fs::path csv = cfg.output_dir / "results.csv";
  std::ofstream out(csv);
  write_results_csv(out, rows);
  out.close();
  if (!out) {
    std::cerr << "cannot write " << csv << '\n';
    return kExitPartial;
  }

  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      std::cerr << "grid point " << r.point.index << " (" << to_string(r.policy) << "): " << r.error << '\n';
    }
  }
  std::cout << "wrote " << rows.size() << " rows to " << csv.string() << '\n';
  return failed == 0 ? kExitOk : kExitPartial;
}

int do_trace(const std::string& config, const std::optional<std::string>& out_path) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(config);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    std::ofstream file;
    if (out_path) {
      file.open(*out_path);
      if (!file) throw DataError("cannot write " + *out_path);
    }
    const CarsResult r = emit_convergence_trace(cfg, out_path ? file : std::cout);
    if (!r.failure.empty()) {
      std::cerr << "CARS stopped early: " << r.failure << '\n';
      return kExitPartial;
    }
  } catch (const Error& e) {
    std::cerr << "trace failed: " << e.what() << '\n';
    return kExitPartial;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cache-aware recommendation experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a scenario sweep and write results.csv");
  run->add_option("--config", run_args.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--seed", run_args.seed, "Root seed for simulation");
  run->add_option("--policies", run_args.policies, "Comma-separated subset of norec,myopic,cars");
  run->add_option("--threads", run_args.threads, "Worker threads (default: CARS_THREADS or config)");

  std::string trace_config;
  std::optional<std::string> trace_out;
  auto* trace = app.add_subcommand("trace", "Write the CARS convergence trace for the first grid point");
  trace->add_option("--config", trace_config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  trace->add_option("--out", trace_out, "CSV file (default: stdout)");

  std::string movielens, lastfm, prep_out;
  int list_size = 4;
  double threshold = 0.6;
  int neighbors = 10;
  auto* prep = app.add_subcommand("prep-dataset", "Build and prune a binary similarity matrix");
  auto* ml = prep->add_option("--movielens", movielens, "MovieLens ratings.csv")->check(CLI::ExistingFile);
  auto* lf = prep->add_option("--lastfm", lastfm, "Last.fm related-artist triplets")->check(CLI::ExistingFile);
  ml->excludes(lf);
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("-N,--list-size", list_size, "Recommendation list size used for pruning")
      ->check(CLI::PositiveNumber);
  prep->add_option("--threshold", threshold, "Cosine threshold for MovieLens")->check(CLI::Range(0.0, 1.0));
  prep->add_option("--cf-neighbors", neighbors, "Neighbors for rating imputation")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return do_run(run_args);
    if (*trace) return do_trace(trace_config, trace_out);
    if (movielens.empty() && lastfm.empty()) {
      std::cerr << "prep-dataset: one of --movielens or --lastfm is required\n";
      return kExitConfig;
    }
    const PreparedDataset data = movielens.empty() ? prepare_lastfm(lastfm, list_size)
                                                   : prepare_movielens(movielens, list_size, threshold, neighbors);
    write_prepared(prep_out, data);
    std::cout << "kept " << data.provenance.size << " of " << data.provenance.input_size << " contents, "
              << data.provenance.relations << " relations\n";
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  return kExitOk;
}
