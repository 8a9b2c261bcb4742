// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// non-zero when any required criterion fails.

#include "llmfew/backbone.hpp"
#include "llmfew/classifier.hpp"
#include "llmfew/experiment.hpp"
#include "llmfew/fewshot_sampler.hpp"
#include "llmfew/lora.hpp"
#include "llmfew/patching.hpp"
#include "llmfew/ptc_encoder.hpp"
#include "llmfew/synthetic.hpp"
#include "llmfew/trainer.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace llmfew;
namespace t = llmfew::testing;

namespace {

// Tolerances and budgets.
constexpr double kPatchBudgetSeconds = 1.0;
constexpr double kCausalityTolerance = 1e-12;
constexpr double kCausalityBudgetSeconds = 30.0;
constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientStep = 1e-6;
constexpr double kGradientFloor = 1e-9;
constexpr double kGradientBudgetSeconds = 60.0;
constexpr double kLoraFloatTolerance = 1e-6;
constexpr int kLoraTrainingSteps = 50;
constexpr double kLoraBudgetSeconds = 30.0;
constexpr double kOverfitMinMean = 0.9;
constexpr double kOverfitMaxStd = 0.1;
constexpr double kOverfitBudgetSeconds = 300.0;
constexpr double kRealDataMinMean = 0.261;
constexpr double kRealDataBudgetSeconds = 900.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, value);
  return buf;
}

void fail(Outcome& o, const std::string& why) {
  o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += why;
}

// 1: patch counts against start enumeration.
Outcome patching_oracle() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(20240601);
  const std::pair<std::size_t, std::size_t> paper[] = {{16, 8}, {32, 16}, {64, 32}, {128, 64}};
  int mismatches = 0, checked = 0;
  for (int i = 0; i < 1000; ++i) {
    std::size_t p = 0, s = 0;
    if (i < 4 * 25) {
      std::tie(p, s) = paper[i % 4];
    } else {
      p = 1 + rng.index(256);
      s = 1 + rng.index(p);
    }
    const std::size_t length = p + rng.index(2000);
    ++checked;
    if (num_patches(length, p, s) != t::enumerate_patch_starts(length, p, s)) ++mismatches;
  }
  const double elapsed = seconds_since(start);
  o.detail = std::to_string(checked) + " triples, " + std::to_string(mismatches) + " mismatches, " +
             fmt("%.3f s", elapsed);
  if (mismatches != 0) fail(o, "count mismatch");
  if (elapsed >= kPatchBudgetSeconds) fail(o, "over time budget");
  return o;
}

// Largest absolute change at positions < j after perturbing token j.
template <typename F>
double leakage(const F& forward, const Matrix<double>& x, int j, Rng& rng) {
  const auto base = forward(x);
  auto bumped = x;
  bumped.row(j) += t::random_matrix<double>(1, x.cols(), rng);
  const auto out = forward(bumped);
  if (j == 0) return 0.0;
  return (out.topRows(j) - base.topRows(j)).cwiseAbs().maxCoeff();
}

// 2: perturbation oracle for causality and receptive field.
Outcome causality() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(2);
  double worst = 0.0;
  std::ostringstream fields;
  for (int depth : {1, 2, 3}) {
    for (int kernel : {3, 5}) {
      EncoderConfig cfg;
      cfg.in_channels = 12;
      cfg.hidden_channels = 16;
      cfg.depth = depth;
      cfg.kernel_size = kernel;
      cfg.d_model = 8;
      PtcEncoder<double> enc(cfg, rng);
      const int expected = 1 + 2 * (kernel - 1) * ((1 << depth) - 1);
      const int length = expected + 8;
      const auto x = t::random_matrix<double>(length, 12, rng);
      auto forward = [&](const Matrix<double>& in) { return enc.forward(in); };
      for (int j = 0; j < length; ++j) worst = std::max(worst, leakage(forward, x, j, rng));

      // Farthest output moved by a change at position 0.
      auto bumped = x;
      bumped.row(0) += t::random_matrix<double>(1, 12, rng);
      const auto diff = (enc.forward(bumped) - enc.forward(x)).cwiseAbs().rowwise().maxCoeff();
      int reach = 0;
      for (int r = 0; r < length; ++r) {
        if (diff(r) > kCausalityTolerance) reach = r + 1;
      }
      fields << " D" << depth << "k" << kernel << "=" << reach;
      if (reach != expected) {
        fail(o, "receptive field D=" + std::to_string(depth) + " k=" + std::to_string(kernel) + " measured " +
                    std::to_string(reach) + ", expected " + std::to_string(expected));
      }
    }
  }
  BackboneSpec spec;  // tiny: d_model 64, 2 layers
  Decoder<double> dec(spec, 3);
  const auto x = t::random_matrix<double>(24, 64, rng);
  auto forward = [&](const Matrix<double>& in) { return dec.forward(in); };
  double backbone_worst = 0.0;
  for (int j = 0; j < 24; ++j) backbone_worst = std::max(backbone_worst, leakage(forward, x, j, rng));

  const double elapsed = seconds_since(start);
  o.detail = "encoder leak " + fmt("%.1e", worst) + ", backbone leak " + fmt("%.1e", backbone_worst) +
             ", receptive fields" + fields.str() + ", " + fmt("%.2f s", elapsed) +
             (o.detail.empty() ? "" : "; " + o.detail);
  if (worst > kCausalityTolerance) fail(o, "encoder leaks into earlier positions");
  if (backbone_worst > kCausalityTolerance) fail(o, "backbone leaks into earlier positions");
  if (elapsed >= kCausalityBudgetSeconds) fail(o, "over time budget");
  return o;
}

// 3: central differences through encoder → fuse → head → cross-entropy.
Outcome gradients() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(3);
  constexpr int kC = 8, kD = 2, kK = 3, kTokens = 7, kClasses = 4, kWidth = 6, kIn = 3 * 4;
  EncoderConfig cfg;
  cfg.in_channels = kIn;
  cfg.hidden_channels = kC;
  cfg.depth = kD;
  cfg.kernel_size = kK;
  cfg.d_model = kWidth;
  PtcEncoder<double> enc(cfg, rng);
  for (auto& conv : enc.convs) {
    conv.bias.value = t::random_matrix<double>(1, kC, rng, 0.1);
    conv.magnitude.value = t::random_matrix<double>(1, kC, rng, 0.2).array() + 1.0;
  }
  ClassifierHead<double> head(kTokens, kWidth, kClasses, LnPosition::kPaper, rng);
  head.norm.scale.value = t::random_matrix<double>(1, kClasses, rng, 0.2).array() + 1.0;
  head.norm.shift.value = t::random_matrix<double>(1, kClasses, rng, 0.2);

  auto tokens = t::random_matrix<double>(kTokens, kIn, rng);
  auto decoded = t::random_matrix<double>(kTokens, kWidth, rng);
  const int label = 1;
  auto loss = [&] { return cross_entropy(head.forward(fuse(enc.forward(tokens), decoded)), label); };

  ParameterRefs<double> params;
  enc.collect(params);
  head.collect(params);
  for (auto* p : params) p->zero_grad();
  PtcEncoder<double>::Cache enc_cache;
  const auto encoded = enc.forward(tokens, &enc_cache);
  const auto fused = fuse(encoded, decoded);
  ClassifierHead<double>::Cache head_cache;
  head.forward(fused, &head_cache);
  const auto grad_pre = fuse_backward(fused, head.backward(head_cache, label, kTokens, kWidth));
  const auto grad_tokens = enc.backward(enc_cache, grad_pre);

  double worst = 0.0;
  std::string worst_name;
  auto track = [&](const std::string& name, double err) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  };
  for (auto* p : params) {
    track(p->name, t::max_relative_error(p->value, p->grad, loss, kGradientStep, kGradientFloor));
  }
  track("tokens", t::max_relative_error(tokens, grad_tokens, loss, kGradientStep, kGradientFloor));
  track("decoded", t::max_relative_error(decoded, grad_pre, loss, kGradientStep, kGradientFloor));

  const double elapsed = seconds_since(start);
  o.detail = "max relative error " + fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.2f s", elapsed);
  if (!(worst < kGradientTolerance)) fail(o, "gradient mismatch");
  if (elapsed >= kGradientBudgetSeconds) fail(o, "over time budget");
  return o;
}

template <typename T>
double max_relative_difference(const Matrix<T>& a, const Matrix<T>& b) {
  const double scale = std::max<double>(1e-30, static_cast<double>(b.cwiseAbs().maxCoeff()));
  return static_cast<double>((a - b).cwiseAbs().maxCoeff()) / scale;
}

// 4: identity at init, merge equivalence, counts, frozen base weights.
Outcome lora_contract() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(4);

  BackboneSpec spec;
  {
    Decoder<double> dec(spec, 1);
    const auto x = t::random_matrix<double>(16, 64, rng);
    const auto before = dec.forward(x);
    dec.inject_lora(8, 16.0, 2);
    if (!(dec.forward(x) == before)) fail(o, "64-bit identity at init is not exact");
  }
  double float_identity = 0.0;
  {
    Decoder<float> dec(spec, 1);
    const auto x = t::random_matrix<float>(16, 64, rng);
    const auto before = dec.forward(x);
    dec.inject_lora(8, 16.0, 2);
    float_identity = max_relative_difference<float>(dec.forward(x), before);
    if (float_identity > kLoraFloatTolerance) fail(o, "32-bit identity at init");
  }

  double merge_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d_in = 4 + static_cast<int>(rng.index(60)), d_out = 4 + static_cast<int>(rng.index(60));
    const int r = 1 + static_cast<int>(rng.index(4));
    const auto w0 = t::random_matrix<float>(d_out, d_in, rng, 0.2);
    const auto x = t::random_matrix<float>(5, d_in, rng);
    auto adapter = init_adapter<float>(d_in, d_out, r, 2.0 * r, static_cast<std::uint64_t>(trial));
    adapter.b.value = t::random_matrix<float>(r, d_in, rng, 0.2);
    const Matrix<float> applied = apply(adapter, w0, x);
    const Matrix<float> merged = x * merge(adapter, w0).transpose();
    // Dense reference built from the definition.
    const Matrix<float> dense_w = w0 + (adapter.alpha / r) * (adapter.a.value * adapter.b.value).eval();
    const Matrix<float> dense = x * dense_w.transpose();
    merge_err = std::max({merge_err, max_relative_difference<float>(merged, applied),
                          max_relative_difference<float>(applied, dense)});
  }
  if (merge_err > kLoraFloatTolerance) fail(o, "merge equivalence");

  bool counts_ok = true;
  for (auto [layers, d, r] : {std::tuple{2, 64, 4}, std::tuple{2, 64, 8}, std::tuple{3, 32, 2}, std::tuple{1, 16, 16}}) {
    BackboneSpec s;
    s.n_layers = layers;
    s.d_model = d;
    s.n_heads = 4;
    Decoder<float> dec(s, 0);
    dec.inject_lora(r, 2.0 * r, 0);
    const std::size_t expected = 3u * static_cast<std::size_t>(layers) * static_cast<std::size_t>(r) *
                                 static_cast<std::size_t>(d + d);
    if (trainable_parameter_count(dec) != expected) counts_ok = false;
  }
  if (!counts_ok) fail(o, "trainable count formula");

  // Train the full variant for 50 full-batch steps and compare base weights bit for bit.
  const auto data = make_sinusoid_dataset();
  auto model = build<float>(with_variant(VariantSpec{}, Variant::kFull), {3, 128, 4}, 5);
  ParameterRefs<float> backbone_params;
  model.backbone->collect(backbone_params);
  std::map<std::string, Matrix<float>> before;
  for (auto* p : backbone_params) before[p->name] = p->value;
  TrainSchedule schedule;
  schedule.epochs = kLoraTrainingSteps;
  train(model, sample_episode(data.train, 1, 5), data.train, schedule);
  int changed_base = 0, changed_lora = 0;
  for (auto* p : backbone_params) {
    const bool same = p->value == before.at(p->name);
    if (p->name.starts_with("lora.")) {
      changed_lora += !same;
    } else {
      changed_base += !same;
    }
  }
  if (changed_base != 0) fail(o, std::to_string(changed_base) + " frozen base weights changed");
  if (changed_lora == 0) fail(o, "adapters did not train");

  const double elapsed = seconds_since(start);
  std::string summary = "f32 identity " + fmt("%.1e", float_identity) + ", merge " + fmt("%.1e", merge_err) +
                        ", counts " + (counts_ok ? "exact" : "WRONG") + ", base weights changed " +
                        std::to_string(changed_base) + " after " + std::to_string(kLoraTrainingSteps) +
                        " steps, " + fmt("%.2f s", elapsed);
  o.detail = summary + (o.detail.empty() ? "" : "; " + o.detail);
  if (elapsed >= kLoraBudgetSeconds) fail(o, "over time budget");
  return o;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ExperimentConfig five_seed_config(const std::string& dataset) {
  ExperimentConfig cfg;
  cfg.datasets = {dataset};
  cfg.shots = 1;
  cfg.model = with_variant(VariantSpec{}, Variant::kFull);
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.data_root = t::data_dir();
  cfg.save_checkpoints = false;
  return cfg;
}

// 5: memorize and generalize on separable synthetic data.
Outcome overfit() {
  Outcome o;
  const auto start = Clock::now();
  const auto results = run_experiment(five_seed_config(kSyntheticDatasetName), {false, nullptr});
  std::vector<double> acc;
  int memorized = 0;
  for (const auto& r : results) {
    if (!r.ok) {
      fail(o, "seed " + std::to_string(r.seed) + " failed: " + r.error);
      continue;
    }
    acc.push_back(r.accuracy);
    memorized += r.train_accuracy == 1.0;
  }
  const double elapsed = seconds_since(start);
  if (acc.empty()) return o;
  const double mean = mean_of(acc), sd = sample_std(acc);
  o.detail = "test accuracy " + fmt("%.3f", mean) + " ± " + fmt("%.3f", sd) + ", train accuracy 1.0 on " +
             std::to_string(memorized) + "/5 seeds, " + fmt("%.1f s", elapsed) +
             (o.detail.empty() ? "" : "; " + o.detail);
  if (memorized != 5) fail(o, "episode not memorized");
  if (mean < kOverfitMinMean) fail(o, "mean below " + fmt("%.2f", kOverfitMinMean));
  if (sd > kOverfitMaxStd) fail(o, "std above " + fmt("%.2f", kOverfitMaxStd));
  if (elapsed >= kOverfitBudgetSeconds) fail(o, "over time budget");
  return o;
}

// 6: JapaneseVowels 1-shot above chance.
Outcome real_data() {
  Outcome o;
  if (!dataset_present(t::data_dir(), "JapaneseVowels")) {
    fail(o, "JapaneseVowels not present under " + t::data_dir().string());
    return o;
  }
  const auto start = Clock::now();
  const auto results = run_experiment(five_seed_config("JapaneseVowels"), {false, nullptr});
  std::vector<double> acc;
  for (const auto& r : results) {
    if (r.ok) {
      acc.push_back(r.accuracy);
    } else {
      fail(o, "seed " + std::to_string(r.seed) + " failed: " + r.error);
    }
  }
  const double elapsed = seconds_since(start);
  if (acc.empty()) return o;
  const double mean = mean_of(acc);
  o.detail = "mean test accuracy " + fmt("%.1f%%", 100.0 * mean) + " ± " + fmt("%.1f", 100.0 * sample_std(acc)) +
             " (chance 11.1%), " + fmt("%.1f s", elapsed) + (o.detail.empty() ? "" : "; " + o.detail);
  if (mean < kRealDataMinMean) fail(o, "mean below " + fmt("%.1f%%", 100.0 * kRealDataMinMean));
  if (elapsed >= kRealDataBudgetSeconds) fail(o, "over time budget");
  return o;
}

// Σ_c min(K, n_c) from raw labels.
std::size_t oracle_episode_size(const Dataset& d, int k) {
  std::map<int, std::size_t> counts;
  for (const auto& s : d.instances) ++counts[s.label];
  std::size_t total = 0;
  for (const auto& [label, n] : counts) total += std::min(n, static_cast<std::size_t>(k));
  return total;
}

// Handwriting-shaped split: 26 classes, several with fewer than five samples.
Dataset handwriting_like() {
  Dataset d;
  d.name = "HandwritingLike";
  d.dims = 3;
  d.length = 8;
  Rng rng(26);
  for (int c = 0; c < 26; ++c) d.class_names.push_back(std::string(1, static_cast<char>('a' + c)));
  for (int c = 0; c < 26; ++c) {
    const std::size_t n = c % 5 == 0 ? 2 : (c % 7 == 0 ? 1 : 3 + rng.index(8));
    for (std::size_t i = 0; i < n; ++i) {
      MultivariateSeries s;
      s.label = c;
      s.values = Matrix<double>::Zero(3, 8);
      d.instances.push_back(s);
    }
  }
  return d;
}

// 7: episode sizes and the learning-rate trace.
Outcome protocol() {
  Outcome o;
  std::vector<Dataset> splits;
  splits.push_back(make_sinusoid_dataset().train);
  splits.push_back(handwriting_like());
  for (const auto& ref : uea_reference_stats()) {
    if (dataset_present(t::data_dir(), ref.name)) splits.push_back(load_dataset_pair(t::data_dir(), ref.name, false).train);
  }
  int checks = 0;
  for (const auto& d : splits) {
    for (int k : {1, 3, 5}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ++checks;
        const auto got = sample_episode(d, k, seed).train_indices.size();
        if (got != oracle_episode_size(d, k)) {
          fail(o, d.name + " K=" + std::to_string(k) + ": " + std::to_string(got) + " != " +
                      std::to_string(oracle_episode_size(d, k)));
        }
      }
    }
  }
  TrainSchedule schedule;
  const double expected[4] = {2e-4, 1.6e-4, 1.28e-4, 1.024e-4};
  int lr_mismatches = 0;
  for (int e = 0; e < 200; ++e) lr_mismatches += lr_at_epoch(schedule, e) != expected[e / 50];
  if (lr_mismatches) fail(o, std::to_string(lr_mismatches) + " learning-rate mismatches");
  std::string names;
  for (const auto& d : splits) names += (names.empty() ? "" : ", ") + d.name;
  o.detail = std::to_string(checks) + " episodes over {" + names + "}, lr trace " +
             (lr_mismatches ? "differs" : "exact") + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 8: dataset statistics.
Outcome data_validation() {
  Outcome o;
  int present = 0;
  std::string detail;
  for (const auto& c : validate_data(t::data_dir())) {
    if (!c.present) continue;
    ++present;
    std::ostringstream row;
    if (c.observed) {
      const auto& s = *c.observed;
      row << c.name << " (" << s.train_size << ", " << s.test_size << ", " << s.dims << ", " << s.length << ", "
          << s.num_classes << ")";
    } else {
      row << c.name << " error: " << c.error;
    }
    detail += (detail.empty() ? "" : ", ") + row.str() + (c.ok() ? " matches" : " MISMATCH");
    if (!c.ok()) fail(o, c.name + " disagrees with the table");
  }
  if (present == 0) fail(o, "no listed dataset present");
  o.detail = std::to_string(present) + " of 10 present: " + detail + (o.detail.empty() ? "" : "; " + o.detail) +
             "; others skipped (not present)";
  return o;
}

// 9: determinism, persistence, aggregation.
Outcome determinism() {
  Outcome o;
  ExperimentConfig cfg = five_seed_config(kSyntheticDatasetName);
  cfg.seeds = {0, 1, 2};
  cfg.schedule.epochs = 30;
  cfg.save_checkpoints = true;
  cfg.output_dir = t::scratch_dir("acceptance_determinism");
  const auto first = run_experiment(cfg, {true, nullptr});
  auto second_cfg = cfg;
  second_cfg.output_dir = t::scratch_dir("acceptance_determinism_2");
  const auto second = run_experiment(second_cfg, {true, nullptr});
  bool same = first.size() == second.size();
  for (std::size_t i = 0; same && i < first.size(); ++i) {
    same = first[i].ok && second[i].ok && first[i].accuracy == second[i].accuracy &&
           first[i].train_accuracy == second[i].train_accuracy;
  }
  if (!same) fail(o, "repeated runs disagree");

  const auto file = cfg.output_dir / "results" / (config_hash(cfg) + ".jsonl");
  const bool round_trip = load_results(file) == first;
  if (!round_trip) fail(o, "results file does not round-trip");

  RunResult r;
  r.dataset = "D";
  r.shots = 1;
  r.variant = "full";
  std::vector<RunResult> trio(3, r);
  trio[0].accuracy = 0.4;
  trio[1].accuracy = 0.5;
  trio[2].accuracy = 0.6;
  const auto rows = aggregate(trio);
  const std::string formatted = rows.size() == 1 ? format_accuracy(rows[0]) : "?";
  if (formatted != "50.0 ± 10.0") fail(o, "aggregate formatted as '" + formatted + "'");

  std::string accs;
  for (const auto& x : first) accs += (accs.empty() ? "" : ", ") + fmt("%.4f", x.accuracy);
  o.detail = "accuracies [" + accs + "] reproduced " + (same ? "exactly" : "NOT exactly") + ", round trip " +
             (round_trip ? "equal" : "differs") + ", aggregate '" + formatted + "'" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, patching_oracle}, {2, causality},   {3, gradients},        {4, lora_contract}, {5, overfit},
      {6, real_data},       {7, protocol},    {8, data_validation},  {9, determinism},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("criterion %d: %s - %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("criterion 10: SKIP - optional; needs externally supplied pretrained weights and GPU hardware\n");
  std::printf("%d of 9 required criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
