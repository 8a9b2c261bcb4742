#include "llmfew/experiment.hpp"

#include "llmfew/array_io.hpp"
#include "llmfew/dataset_io.hpp"
#include "llmfew/errors.hpp"
#include "llmfew/fewshot_sampler.hpp"
#include "llmfew/rng.hpp"
#include "llmfew/synthetic.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace llmfew {

namespace {

const std::set<std::string> kTopLevelKeys = {
    "datasets", "k",         "variant",   "backbone",        "encoder",   "lora",
    "head",     "schedule",  "seeds",     "normalize",       "train_backbone",
    "data_root", "output_dir", "save_checkpoints"};

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename V>
void read(const json& obj, const char* key, V& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json shots_to_json(const std::optional<int>& shots) {
  return shots ? json(*shots) : json("full");
}

std::optional<int> shots_from_json(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "full") return std::nullopt;
    try {
      return std::stoi(v.get<std::string>());
    } catch (const std::exception&) {
      throw ConfigError("k must be a positive integer or \"full\"");
    }
  }
  if (v.is_number_integer()) return v.get<int>();
  throw ConfigError("k must be a positive integer or \"full\"");
}

std::string hex16(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// Appends one line under an exclusive advisory lock so concurrent workers
// can share a results file.
void append_locked(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string());
  ::flock(fd, LOCK_EX);
  const std::string payload = line + "\n";
  std::size_t written = 0;
  while (written < payload.size()) {
    const auto n = ::write(fd, payload.data() + written, payload.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (written != payload.size()) throw IoError("short write to " + path.string());
}

std::filesystem::path resolve_data_root(const ExperimentConfig& cfg) {
  if (!cfg.data_root.empty()) return cfg.data_root;
  if (const char* env = std::getenv("LLMFEW_DATA_ROOT")) return env;
  return {};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("config lists no datasets");
  if (shots && *shots <= 0) throw ConfigError("k must be positive");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (batch_size && *batch_size < 0) throw ConfigError("batch_size must be non-negative");
  variant_spec().validate();
  schedule.validate();
}

VariantSpec ExperimentConfig::variant_spec() const {
  VariantSpec spec = with_variant(model, model.variant);
  if (spec.lora) spec.lora = lora;
  return spec;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  json j;
  j["datasets"] = cfg.datasets;
  j["k"] = shots_to_json(cfg.shots);
  j["variant"] = to_string(m.variant);
  j["backbone"] = {{"kind", to_string(m.backbone.kind)},
                   {"d_model", m.backbone.d_model},
                   {"n_layers", m.backbone.n_layers},
                   {"n_heads", m.backbone.n_heads},
                   {"ffn_multiplier", m.backbone.ffn_multiplier},
                   {"max_positions", m.backbone.max_positions},
                   {"checkpoint_path", m.backbone.checkpoint_path.string()}};
  j["encoder"] = {{"hidden", m.encoder.hidden_channels},
                  {"depth", m.encoder.depth},
                  {"kernel", m.encoder.kernel_size},
                  {"negative_slope", m.encoder.negative_slope},
                  {"patch_len", m.patch_len},
                  {"stride", m.stride}};
  j["lora"] = {{"rank", cfg.lora.rank}, {"alpha", cfg.lora.alpha}};
  j["head"] = {{"ln_position", to_string(m.ln_position)}, {"no_llm_relu", m.no_llm_relu}};
  const auto& s = cfg.schedule;
  j["schedule"] = {{"epochs", s.epochs},
                   {"base_lr", s.base_lr},
                   {"decay_factor", s.decay_factor},
                   {"decay_every", s.decay_every},
                   {"batch_size", cfg.batch_size ? json(*cfg.batch_size) : json(nullptr)},
                   {"clip_norm", s.clip_norm},
                   {"beta1", s.beta1},
                   {"beta2", s.beta2},
                   {"adam_eps", s.adam_eps},
                   {"precision", to_string(s.precision)}};
  j["seeds"] = cfg.seeds;
  j["normalize"] = cfg.normalize;
  j["train_backbone"] = m.train_backbone;
  j["save_checkpoints"] = cfg.save_checkpoints;
  j["data_root"] = cfg.data_root.string();
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, kTopLevelKeys, "");
  ExperimentConfig cfg;
  auto& m = cfg.model;

  if (j.contains("datasets")) {
    const auto& d = j.at("datasets");
    if (d.is_string()) {
      cfg.datasets = {d.get<std::string>()};
    } else {
      read(j, "datasets", cfg.datasets);
    }
  }
  if (j.contains("k")) cfg.shots = shots_from_json(j.at("k"));
  if (j.contains("variant")) m.variant = variant_from_string(j.at("variant").get<std::string>());

  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    reject_unknown(b, {"kind", "d_model", "n_layers", "n_heads", "ffn_multiplier", "max_positions",
                       "checkpoint_path"},
                   "backbone.");
    std::string kind = to_string(m.backbone.kind);
    read(b, "kind", kind);
    m.backbone.kind = backbone_kind_from_string(kind);
    read(b, "d_model", m.backbone.d_model);
    read(b, "n_layers", m.backbone.n_layers);
    read(b, "n_heads", m.backbone.n_heads);
    read(b, "ffn_multiplier", m.backbone.ffn_multiplier);
    read(b, "max_positions", m.backbone.max_positions);
    std::string ckpt;
    read(b, "checkpoint_path", ckpt);
    m.backbone.checkpoint_path = ckpt;
  }

  bool stride_given = false;
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    reject_unknown(e, {"hidden", "depth", "kernel", "negative_slope", "patch_len", "stride"}, "encoder.");
    read(e, "hidden", m.encoder.hidden_channels);
    read(e, "depth", m.encoder.depth);
    read(e, "kernel", m.encoder.kernel_size);
    read(e, "negative_slope", m.encoder.negative_slope);
    read(e, "patch_len", m.patch_len);
    stride_given = e.contains("stride") && !e.at("stride").is_null();
    if (stride_given) read(e, "stride", m.stride);
  }
  if (!stride_given) m.stride = static_cast<int>(default_stride(static_cast<std::size_t>(std::max(1, m.patch_len))));

  if (j.contains("lora") && !j.at("lora").is_null()) {
    const auto& l = j.at("lora");
    reject_unknown(l, {"rank", "alpha"}, "lora.");
    read(l, "rank", cfg.lora.rank);
    read(l, "alpha", cfg.lora.alpha);
  }
  if (j.contains("head")) {
    const auto& h = j.at("head");
    reject_unknown(h, {"ln_position", "no_llm_relu"}, "head.");
    std::string ln = to_string(m.ln_position);
    read(h, "ln_position", ln);
    m.ln_position = ln_position_from_string(ln);
    read(h, "no_llm_relu", m.no_llm_relu);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"epochs", "base_lr", "decay_factor", "decay_every", "batch_size", "clip_norm",
                       "beta1", "beta2", "adam_eps", "precision"},
                   "schedule.");
    read(s, "epochs", cfg.schedule.epochs);
    read(s, "base_lr", cfg.schedule.base_lr);
    read(s, "decay_factor", cfg.schedule.decay_factor);
    read(s, "decay_every", cfg.schedule.decay_every);
    if (s.contains("batch_size") && !s.at("batch_size").is_null()) {
      int batch = 0;
      read(s, "batch_size", batch);
      cfg.batch_size = batch;
    }
    read(s, "clip_norm", cfg.schedule.clip_norm);
    read(s, "beta1", cfg.schedule.beta1);
    read(s, "beta2", cfg.schedule.beta2);
    read(s, "adam_eps", cfg.schedule.adam_eps);
    std::string precision = to_string(cfg.schedule.precision);
    read(s, "precision", precision);
    cfg.schedule.precision = precision_from_string(precision);
  }
  read(j, "seeds", cfg.seeds);
  read(j, "normalize", cfg.normalize);
  read(j, "train_backbone", m.train_backbone);
  read(j, "save_checkpoints", cfg.save_checkpoints);
  std::string data_root = cfg.data_root.string(), output_dir = cfg.output_dir.string();
  read(j, "data_root", data_root);
  read(j, "output_dir", output_dir);
  cfg.data_root = data_root;
  cfg.output_dir = output_dir;
  m.lora = cfg.lora;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("data_root");
  j.erase("output_dir");
  j.erase("save_checkpoints");
  if (!cfg.variant_spec().lora) j.erase("lora");
  return hex16(stable_hash(j.dump()));
}

json to_json(const RunResult& r) {
  return {{"dataset", r.dataset},
          {"k", shots_to_json(r.shots)},
          {"variant", r.variant},
          {"seed", r.seed},
          {"accuracy", r.accuracy},
          {"train_accuracy", r.train_accuracy},
          {"epochs", r.epochs},
          {"wall_seconds", r.wall_seconds},
          {"config_hash", r.config_hash},
          {"episode_policy", r.episode_policy},
          {"ok", r.ok},
          {"error", r.error},
          {"overrides", r.overrides}};
}

RunResult run_result_from_json(const json& j) {
  RunResult r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.shots = shots_from_json(j.at("k"));
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.train_accuracy = j.value("train_accuracy", 0.0);
    r.epochs = j.value("epochs", 0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.config_hash = j.value("config_hash", std::string());
    r.episode_policy = j.value("episode_policy", std::string("resample-per-seed"));
    r.ok = j.value("ok", true);
    r.error = j.value("error", std::string());
    r.overrides = j.value("overrides", json::object());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run result: ") + e.what());
  }
  return r;
}

std::vector<RunResult> load_results(const std::filesystem::path& file_or_dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(file_or_dir)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(file_or_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(file_or_dir);
  }
  std::vector<RunResult> results;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      results.push_back(run_result_from_json(json::parse(line)));
    }
  }
  return results;
}

namespace {

struct LoadedData {
  std::string name;
  DatasetPair pair;
};

template <typename T>
RunResult run_once(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t seed,
                   const std::string& hash, const std::filesystem::path& checkpoint_dir) {
  RunResult result;
  result.dataset = data.name;
  result.shots = cfg.shots;
  result.variant = to_string(cfg.model.variant);
  result.seed = seed;
  result.config_hash = hash;

  const auto start = std::chrono::steady_clock::now();
  const auto& train_split = data.pair.train;
  const Episode episode = cfg.shots ? sample_episode(train_split, *cfg.shots, seed) : full_episode(train_split);

  DatasetMeta meta{static_cast<int>(train_split.dims), static_cast<int>(train_split.length),
                   static_cast<int>(train_split.num_classes())};
  Model<T> model = build<T>(cfg.variant_spec(), meta, seed);

  TrainSchedule schedule = cfg.schedule;
  schedule.seed = seed;
  schedule.batch_size = cfg.batch_size ? *cfg.batch_size : (cfg.shots ? 0 : 16);
  const TrainHistory history = train(model, episode, train_split, schedule);

  result.accuracy = evaluate(model, data.pair.test);
  result.train_accuracy = history.final_train_accuracy;
  result.epochs = static_cast<int>(history.loss.size());
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!checkpoint_dir.empty()) {
    ParameterRefs<T> params;
    model.collect(params);
    ParameterRefs<T> trainable;
    for (auto* p : params) {
      if (p->trainable) trainable.push_back(p);
    }
    save_parameters(checkpoint_dir, trainable);
    MetaMap meta_out = {{"dataset", data.name},
                        {"variant", result.variant},
                        {"seed", std::to_string(seed)},
                        {"config_hash", hash}};
    if (model.backbone) {
      int n = 0;
      for (auto& layer : model.backbone->layers) {
        for (auto* proj : {&layer.q, &layer.k, &layer.v}) {
          if (!proj->adapter) continue;
          std::ostringstream record;
          record << proj->adapter->target.id() << ' ' << proj->adapter->rank << ' '
                 << proj->adapter->alpha;
          meta_out["adapter." + std::to_string(n++)] = record.str();
        }
      }
    }
    write_meta(checkpoint_dir / "meta", meta_out);
  }
  return result;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto root = resolve_data_root(cfg);
  for (const auto& name : cfg.datasets) {
    if (is_synthetic_dataset(name)) continue;
    if (root.empty()) throw ConfigError("no data_root configured (set --data-root or LLMFEW_DATA_ROOT)");
    if (!dataset_present(root, name)) {
      throw ConfigError("dataset '" + name + "' not found under " + root.string());
    }
  }

  std::vector<LoadedData> loaded;
  for (const auto& name : cfg.datasets) {
    LoadedData d;
    d.name = name;
    if (is_synthetic_dataset(name)) {
      d.pair = make_sinusoid_dataset();
      if (cfg.normalize) {
        znormalize(d.pair.train);
        znormalize(d.pair.test);
      }
    } else {
      d.pair = load_dataset_pair(root, name, cfg.normalize);
    }
    loaded.push_back(std::move(d));
  }

  const auto hash = config_hash(cfg);
  std::filesystem::path results_file;
  if (options.persist) {
    std::filesystem::create_directories(cfg.output_dir / "results");
    results_file = cfg.output_dir / "results" / (hash + ".jsonl");
    std::ofstream(results_file, std::ios::trunc);
  }

  std::vector<RunResult> results;
  for (const auto& data : loaded) {
    for (const auto seed : cfg.seeds) {
      const std::string run_id = data.name + "_k" + shots_label(cfg.shots) + "_" +
                                 to_string(cfg.model.variant) + "_s" + std::to_string(seed) + "_" +
                                 hash.substr(0, 8);
      const auto checkpoint_dir = options.persist && cfg.save_checkpoints
                                      ? cfg.output_dir / "runs" / run_id / "checkpoint"
                                      : std::filesystem::path();
      RunResult result;
      try {
        result = cfg.schedule.precision == Precision::kFloat64
                     ? run_once<double>(cfg, data, seed, hash, checkpoint_dir)
                     : run_once<float>(cfg, data, seed, hash, checkpoint_dir);
      } catch (const std::exception& e) {
        result = RunResult{};
        result.dataset = data.name;
        result.shots = cfg.shots;
        result.variant = to_string(cfg.model.variant);
        result.seed = seed;
        result.config_hash = hash;
        result.ok = false;
        result.error = e.what();
      }
      if (options.log) {
        *options.log << run_id << ": "
                     << (result.ok ? "accuracy " + std::to_string(result.accuracy)
                                   : "FAILED " + result.error)
                     << '\n';
      }
      if (options.persist) append_locked(results_file, to_json(result).dump());
      results.push_back(std::move(result));
    }
  }
  return results;
}

std::vector<RunResult> ablate(const ExperimentConfig& base, const RunOptions& options) {
  std::vector<RunResult> all;
  for (const auto v : all_variants()) {
    ExperimentConfig cfg = base;
    cfg.model.variant = v;
    auto results = run_experiment(cfg, options);
    all.insert(all.end(), results.begin(), results.end());
  }
  return all;
}

Grid grid_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("grid must be a JSON object of key → value list");
  Grid grid;
  for (const auto& [key, values] : j.items()) {
    if (!values.is_array()) throw ConfigError("grid entry '" + key + "' must be a list");
    grid.emplace_back(key, std::vector<json>(values.begin(), values.end()));
  }
  return grid;
}

namespace {

json::json_pointer pointer_for(const std::string& dotted) {
  std::string path;
  std::size_t start = 0;
  while (true) {
    const auto pos = dotted.find('.', start);
    path += "/" + dotted.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return json::json_pointer(path);
}

bool known_grid_key(const std::string& key) {
  if (key == "encoder.patch") return true;
  static const std::set<std::string> excluded = {"datasets", "seeds", "data_root", "output_dir",
                                                 "save_checkpoints"};
  const auto top = key.substr(0, key.find('.'));
  if (excluded.count(top)) return false;
  static const json defaults = to_json(ExperimentConfig{});
  try {
    return defaults.contains(pointer_for(key));
  } catch (const json::exception&) {
    return false;
  }
}

}  // namespace

void validate_grid(const Grid& grid) {
  for (const auto& [key, values] : grid) {
    if (!known_grid_key(key)) throw ConfigError("unknown grid key '" + key + "'");
    if (values.empty()) throw ConfigError("grid entry '" + key + "' has no values");
  }
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const json& overrides) {
  json j = to_json(base);
  for (const auto& [key, value] : overrides.items()) {
    if (!known_grid_key(key)) throw ConfigError("unknown grid key '" + key + "'");
    if (key == "encoder.patch") {
      int patch_len = 0, stride = 0;
      if (value.is_array() && value.size() == 2) {
        patch_len = value[0].get<int>();
        stride = value[1].get<int>();
      } else if (value.is_number_integer()) {
        patch_len = value.get<int>();
        stride = static_cast<int>(default_stride(static_cast<std::size_t>(std::max(1, patch_len))));
      } else {
        throw ConfigError("encoder.patch values must be [P, S] pairs or integers");
      }
      j["encoder"]["patch_len"] = patch_len;
      j["encoder"]["stride"] = stride;
    } else {
      j[pointer_for(key)] = value;
    }
  }
  return config_from_json(j);
}

std::vector<json> expand_grid(const Grid& grid) {
  std::vector<json> combos = {json::object()};
  for (const auto& [key, values] : grid) {
    std::vector<json> next;
    for (const auto& partial : combos) {
      for (const auto& v : values) {
        json c = partial;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }
  return combos;
}

std::vector<RunResult> sweep(const Grid& grid, const ExperimentConfig& base, const RunOptions& options) {
  validate_grid(grid);
  const auto combos = expand_grid(grid);
  std::vector<ExperimentConfig> configs;
  for (const auto& overrides : combos) configs.push_back(apply_overrides(base, overrides));
  for (const auto& cfg : configs) cfg.validate();

  std::vector<RunResult> all;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto results = run_experiment(configs[i], options);
    for (auto& r : results) r.overrides = combos[i];
    if (options.persist && !combos[i].empty()) {
      // Rewrite with the overrides attached.
      const auto path = configs[i].output_dir / "results" / (config_hash(configs[i]) + ".jsonl");
      std::ofstream out(path, std::ios::trunc);
      for (const auto& r : results) out << to_json(r).dump() << '\n';
    }
    all.insert(all.end(), results.begin(), results.end());
  }
  return all;
}

Grid sensitivity_grid(const std::string& name) {
  if (name == "hidden") return {{"encoder.hidden", {128, 256, 512, 1024}}};
  if (name == "depth") return {{"encoder.depth", {1, 2, 3, 4, 5}}};
  if (name == "kernel") return {{"encoder.kernel", {3, 4, 5, 6, 7}}};
  if (name == "patch") {
    return {{"encoder.patch", {json::array({16, 8}), json::array({32, 16}), json::array({64, 32}),
                               json::array({128, 64})}}};
  }
  throw ConfigError("unknown sensitivity grid '" + name + "' (hidden, depth, kernel, patch)");
}

std::vector<DataCheck> validate_data(const std::filesystem::path& root,
                                     const std::vector<std::string>& names) {
  std::vector<std::string> targets = names;
  if (targets.empty()) {
    for (const auto& ref : uea_reference_stats()) targets.emplace_back(ref.name);
  }
  std::vector<DataCheck> checks;
  for (const auto& name : targets) {
    DataCheck check;
    check.name = name;
    check.expected = reference_stats_for(name);
    check.present = dataset_present(root, name);
    if (check.present) {
      try {
        const auto pair = load_dataset_pair(root, name, false);
        check.observed = dataset_stats(pair.train, pair.test);
      } catch (const std::exception& e) {
        check.error = e.what();
      }
    }
    checks.push_back(std::move(check));
  }
  return checks;
}

std::string shots_label(const std::optional<int>& shots) {
  return shots ? std::to_string(*shots) : "full";
}

std::vector<AggregateRow> aggregate(const std::vector<RunResult>& results, std::ostream* warnings) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  std::map<Key, std::optional<int>> shots_of;
  for (const auto& r : results) {
    const Key key{r.dataset, shots_label(r.shots), r.variant};
    if (!groups.count(key)) {
      order.push_back(key);
      groups[key];
      shots_of[key] = r.shots;
    }
    if (r.ok) groups[key].push_back(r.accuracy);
  }

  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& acc = groups[key];
    if (acc.empty()) {
      if (warnings) {
        *warnings << "warning: no successful runs for " << std::get<0>(key) << " k=" << std::get<1>(key)
                  << " variant=" << std::get<2>(key) << "; group omitted\n";
      }
      continue;
    }
    AggregateRow row;
    row.dataset = std::get<0>(key);
    row.shots = shots_of[key];
    row.variant = std::get<2>(key);
    row.runs = acc.size();
    double sum = 0.0;
    for (double a : acc) sum += a;
    row.mean = sum / static_cast<double>(acc.size());
    if (acc.size() > 1) {
      double sq = 0.0;
      for (double a : acc) sq += (a - row.mean) * (a - row.mean);
      row.std_dev = std::sqrt(sq / static_cast<double>(acc.size() - 1));
    } else {
      row.single_run = true;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_accuracy(const AggregateRow& row) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", 100.0 * row.mean, 100.0 * row.std_dev);
  return buf;
}

void write_summary_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "dataset,k,variant,runs,mean_pct,std_pct,single_run\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f", 100.0 * r.mean, 100.0 * r.std_dev);
    out << r.dataset << ',' << shots_label(r.shots) << ',' << r.variant << ',' << r.runs << ',' << buf
        << ',' << (r.single_run ? "true" : "false") << '\n';
  }
}

std::string summary_markdown(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "| Dataset | K | Variant | Runs | Accuracy (%) |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.dataset << " | " << shots_label(r.shots) << " | " << r.variant << " | " << r.runs
        << " | " << format_accuracy(r) << (r.single_run ? " (single run)" : "") << " |\n";
  }
  return out.str();
}

}  // namespace llmfew
