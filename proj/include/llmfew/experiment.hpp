#pragma once

#include "llmfew/dataset_io.hpp"
#include "llmfew/trainer.hpp"
#include "llmfew/variants.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace llmfew {

using json = nlohmann::json;

struct ExperimentConfig {
  std::vector<std::string> datasets;
  std::optional<int> shots = 1;  // nullopt: train on the full train split
  // model.lora is ignored; `lora` applies whenever the variant uses LoRA.
  VariantSpec model;
  LoraConfig lora;
  TrainSchedule schedule;
  // Unset: the whole episode per step in K-shot mode, 16 for full splits.
  std::optional<int> batch_size;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  bool normalize = true;
  bool save_checkpoints = true;
  std::filesystem::path data_root;
  std::filesystem::path output_dir = "runs";

  void validate() const;
  // `model` with the LoRA setting resolved for its variant.
  VariantSpec variant_spec() const;
};

json to_json(const ExperimentConfig& cfg);
// Missing keys take defaults; unknown keys raise ConfigError.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// 16 hex digits over the canonical JSON of every field that affects
// results (data_root and output_dir excluded). Key order in the source
// file does not matter.
std::string config_hash(const ExperimentConfig& cfg);

struct RunResult {
  std::string dataset;
  std::optional<int> shots;
  std::string variant;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  int epochs = 0;
  double wall_seconds = 0.0;
  std::string config_hash;
  std::string episode_policy = "resample-per-seed";
  bool ok = true;
  std::string error;
  json overrides = json::object();

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

json to_json(const RunResult& r);
RunResult run_result_from_json(const json& j);

std::vector<RunResult> load_results(const std::filesystem::path& file_or_dir);

struct RunOptions {
  bool persist = true;
  std::ostream* log = nullptr;
};

// For every (dataset, seed): sample an episode, build the variant, train,
// evaluate. Missing datasets are reported before any training. A run that
// fails is recorded with ok = false and the remaining runs continue.
// Results go to <output_dir>/results/<config hash>.jsonl, rewritten on
// each call.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Runs all four variants from one base config.
std::vector<RunResult> ablate(const ExperimentConfig& base, const RunOptions& options = {});

// Ordered hyperparameter grid. Keys are dotted config paths such as
// "encoder.kernel"; "encoder.patch" takes [P, S] pairs (or P alone, with
// S = P/2).
using Grid = std::vector<std::pair<std::string, std::vector<json>>>;

Grid grid_from_json(const json& j);
// Throws ConfigError naming the first unknown key.
void validate_grid(const Grid& grid);
ExperimentConfig apply_overrides(const ExperimentConfig& base, const json& overrides);
std::vector<json> expand_grid(const Grid& grid);
std::vector<RunResult> sweep(const Grid& grid, const ExperimentConfig& base,
                             const RunOptions& options = {});

// Grids from the sensitivity study: "hidden", "depth", "kernel", "patch".
Grid sensitivity_grid(const std::string& name);

struct DataCheck {
  std::string name;
  bool present = false;
  std::optional<DatasetStats> observed;
  std::optional<DatasetStats> expected;  // published statistics, if listed
  std::string error;

  bool ok() const { return present && error.empty() && observed && (!expected || *observed == *expected); }
};

// Parses each dataset under `root` and compares (train, test, M, L, N)
// against the published table. An empty name list checks all ten listed
// datasets.
std::vector<DataCheck> validate_data(const std::filesystem::path& root,
                                     const std::vector<std::string>& names = {});

struct AggregateRow {
  std::string dataset;
  std::optional<int> shots;
  std::string variant;
  std::size_t runs = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // sample (n − 1); 0 for a single run
  bool single_run = false;
};

// Groups successful runs by (dataset, K, variant). Groups with no
// successful run are omitted and reported on `warnings` when given.
std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results,
                                    std::ostream* warnings = nullptr);

// "50.0 ± 10.0": percent with one decimal.
std::string format_accuracy(const AggregateRow& row);
std::string shots_label(const std::optional<int>& shots);

void write_summary_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
std::string summary_markdown(const std::vector<AggregateRow>& rows);

}  // namespace llmfew
