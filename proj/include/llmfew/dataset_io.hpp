#pragma once

#include "llmfew/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace llmfew {

// One labelled instance: M channels × L time steps.
struct MultivariateSeries {
  Matrix<double> values;
  int label = 0;

  std::size_t dims() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(values.cols()); }
};

enum class Split { kTrain, kTest };

struct Dataset {
  std::string name;
  Split split = Split::kTrain;
  std::vector<std::string> class_names;
  std::vector<MultivariateSeries> instances;
  std::size_t dims = 0;
  std::size_t length = 0;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return instances.size(); }

  // Throws ArgumentError when an invariant does not hold (empty, fewer than
  // two classes, mismatched shapes, label out of range).
  void validate() const;
};

struct DatasetStats {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t dims = 0;
  std::size_t length = 0;
  std::size_t num_classes = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct ParseOptions {
  // Pad to at least this many steps (used to align train and test splits).
  std::size_t min_length = 0;
};

Dataset parse_ts(std::istream& in, const std::string& source_name = "<stream>",
                 const ParseOptions& options = {});
Dataset parse_ts_file(const std::filesystem::path& path,
                      const ParseOptions& options = {});

// Writes a fully materialized (equal-length, no missing values) `.ts` file.
// Values are printed in shortest round-trip form.
void write_ts(const Dataset& dataset, std::ostream& out);

// Right-pads every channel by repeating its last value.
void pad_to_length(Dataset& dataset, std::size_t length);

// Per-channel z-normalization with population standard deviation; a
// zero-variance channel becomes all zeros.
MultivariateSeries znormalize_instance(const MultivariateSeries& series);
void znormalize(Dataset& dataset);

// Train/test pair for one dataset, padded to a common length.
struct DatasetPair {
  Dataset train;
  Dataset test;
};

std::filesystem::path dataset_file(const std::filesystem::path& root,
                                   const std::string& name, Split split);
bool dataset_present(const std::filesystem::path& root, const std::string& name);

DatasetPair load_dataset_pair(const std::filesystem::path& root,
                              const std::string& name, bool normalize);

DatasetStats dataset_stats(const Dataset& train, const Dataset& test);

// Published statistics for the ten UEA datasets used in the benchmark.
struct ReferenceStats {
  const char* abbreviation;
  const char* name;
  DatasetStats stats;
};
const std::vector<ReferenceStats>& uea_reference_stats();
std::optional<DatasetStats> reference_stats_for(const std::string& name);

}  // namespace llmfew
