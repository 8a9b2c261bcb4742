#include "llmfew/errors.hpp"
#include "llmfew/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace llmfew;

struct CommonFlags {
  std::string config;
  std::string data_root;
  std::string out;
  std::string seeds;
  std::string k;
  std::string variant;
  std::vector<std::string> datasets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--data-root", f.data_root, "Directory holding <Name>/<Name>_TRAIN.ts");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seeds", f.seeds, "Comma-separated seed list, e.g. 0,1,2");
  cmd->add_option("--k", f.k, "Shots per class, or 'full'");
  cmd->add_option("--variant", f.variant, "full | no_ptcenc | frozen | no_llm");
  cmd->add_option("--dataset", f.datasets, "Dataset name (repeatable); overrides the config list");
}

std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("LLMFEW_DATA_ROOT")) return env;
  return std::filesystem::path(LLMFEW_SOURCE_DIR) / "data";
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.datasets.empty()) cfg.datasets = f.datasets;
  if (!f.data_root.empty()) {
    cfg.data_root = f.data_root;
  } else if (cfg.data_root.empty()) {
    cfg.data_root = default_data_root();
  }
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.seeds.empty()) {
    cfg.seeds.clear();
    std::stringstream in(f.seeds);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        cfg.seeds.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw ConfigError("bad seed '" + item + "'");
      }
    }
  }
  if (!f.k.empty()) {
    if (f.k == "full") {
      cfg.shots.reset();
    } else {
      try {
        cfg.shots = std::stoi(f.k);
      } catch (const std::exception&) {
        throw ConfigError("--k expects a positive integer or 'full'");
      }
    }
  }
  if (!f.variant.empty()) cfg.model.variant = variant_from_string(f.variant);
  cfg.validate();
  return cfg;
}

int finish(const std::vector<RunResult>& results, const ExperimentConfig& cfg) {
  const auto rows = aggregate(results, &std::cerr);
  std::cout << summary_markdown(rows);
  write_summary_csv(rows, cfg.output_dir / "summary.csv");
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.ok;
  if (failed > 0) {
    std::cerr << failed << " of " << results.size() << " runs failed\n";
    return 1;
  }
  return 0;
}

int validate_data_cmd(const CommonFlags& f) {
  const std::filesystem::path root = f.data_root.empty() ? default_data_root() : std::filesystem::path(f.data_root);
  const auto checks = validate_data(root, f.datasets);
  int present = 0, failures = 0;
  std::cout << "dataset                    train   test    M     L    N  status\n";
  for (const auto& c : checks) {
    std::cout << std::left << std::setw(24) << c.name << std::right;
    if (!c.present) {
      std::cout << "  skipped (not present)\n";
      continue;
    }
    ++present;
    if (!c.error.empty()) {
      ++failures;
      std::cout << "  ERROR " << c.error << '\n';
      continue;
    }
    const auto& s = *c.observed;
    std::cout << std::setw(8) << s.train_size << std::setw(7) << s.test_size << std::setw(5) << s.dims
              << std::setw(6) << s.length << std::setw(5) << s.num_classes;
    if (!c.expected) {
      std::cout << "  unlisted\n";
    } else if (c.ok()) {
      std::cout << "  matches table\n";
    } else {
      ++failures;
      const auto& e = *c.expected;
      std::cout << "  MISMATCH expected (" << e.train_size << ", " << e.test_size << ", " << e.dims
                << ", " << e.length << ", " << e.num_classes << ")\n";
    }
  }
  if (present == 0) {
    std::cerr << "no datasets found under " << root << '\n';
    return 1;
  }
  return failures == 0 ? 0 : 1;
}

Grid load_grid(const std::string& spec) {
  if (spec == "hidden" || spec == "depth" || spec == "kernel" || spec == "patch") {
    return sensitivity_grid(spec);
  }
  std::ifstream in(spec);
  if (!in) throw IoError("cannot open grid file " + spec);
  return grid_from_json(json::parse(in));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot multivariate time series classification experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* validate = app.add_subcommand("validate-data", "Parse datasets and check them against the published table");
  validate->add_option("--data-root", flags.data_root, "Dataset directory");
  validate->add_option("datasets", flags.datasets, "Dataset names (default: all ten listed)");

  auto* train_cmd = app.add_subcommand("train", "Run one config over its datasets and seeds");
  add_common(train_cmd, flags);

  std::string grid_spec;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a hyperparameter grid");
  add_common(sweep_cmd, flags);
  sweep_cmd->add_option("--grid", grid_spec, "Grid JSON file, or one of hidden|depth|kernel|patch")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Run all four variants from one config");
  add_common(ablate_cmd, flags);

  std::string results_path, csv_path, md_path;
  auto* report = app.add_subcommand("report", "Aggregate persisted results");
  report->add_option("--results", results_path, "Results .jsonl file or directory")->required();
  report->add_option("--csv", csv_path, "Write the summary CSV here");
  report->add_option("--markdown", md_path, "Write the markdown table here");

  CLI11_PARSE(app, argc, argv);

  try {
    RunOptions options;
    options.log = &std::cerr;
    if (validate->parsed()) return validate_data_cmd(flags);
    if (train_cmd->parsed()) {
      const auto cfg = resolve_config(flags);
      return finish(run_experiment(cfg, options), cfg);
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = resolve_config(flags);
      return finish(sweep(load_grid(grid_spec), cfg, options), cfg);
    }
    if (ablate_cmd->parsed()) {
      const auto cfg = resolve_config(flags);
      return finish(ablate(cfg, options), cfg);
    }
    if (report->parsed()) {
      const auto results = load_results(results_path);
      const auto rows = aggregate(results, &std::cerr);
      const auto table = summary_markdown(rows);
      std::cout << table;
      if (!csv_path.empty()) write_summary_csv(rows, csv_path);
      if (!md_path.empty()) std::ofstream(md_path) << table;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
