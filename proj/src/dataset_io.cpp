#include "llmfew/dataset_io.hpp"

#include "llmfew/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

namespace llmfew {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

bool parse_bool(std::string_view token, std::size_t line) {
  const auto t = lower(token);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ParseError(line, "expected true/false, found '" + std::string(token) + "'");
}

std::size_t parse_count(std::string_view token, std::size_t line) {
  std::size_t value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw ParseError(line, "expected positive integer, found '" + std::string(token) + "'");
  }
  return value;
}

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

double parse_value(std::string_view token, std::size_t line) {
  token = trim(token);
  if (token == "?" || lower(token) == "nan") return kMissing;
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, "invalid numeric value '" + std::string(token) + "'");
  }
  return value;
}

// Last observation carried forward; leading gaps take the first observed
// value; an entirely missing channel becomes zeros.
void repair_missing(std::vector<double>& channel) {
  const auto first = std::find_if(channel.begin(), channel.end(),
                                  [](double v) { return !std::isnan(v); });
  if (first == channel.end()) {
    std::fill(channel.begin(), channel.end(), 0.0);
    return;
  }
  double carry = *first;
  for (auto& v : channel) {
    if (std::isnan(v)) {
      v = carry;
    } else {
      carry = v;
    }
  }
}

struct Header {
  std::string problem_name;
  bool univariate = false;
  bool equal_length = true;
  std::optional<std::size_t> dims;
  std::optional<std::size_t> series_length;
  std::vector<std::string> class_names;
  bool has_class_label = false;
};

void parse_directive(std::string_view text, std::size_t line, Header& header) {
  const auto tokens = split_ws(text);
  const auto key = lower(tokens.front());
  auto require_arg = [&](std::size_t n) {
    if (tokens.size() < n + 1) throw ParseError(line, "directive " + key + " is missing its value");
  };
  if (key == "@problemname") {
    require_arg(1);
    header.problem_name = std::string(tokens[1]);
  } else if (key == "@timestamps") {
    require_arg(1);
    if (parse_bool(tokens[1], line)) throw ParseError(line, "time-stamped series are not supported");
  } else if (key == "@missing") {
    require_arg(1);
    parse_bool(tokens[1], line);
  } else if (key == "@univariate") {
    require_arg(1);
    header.univariate = parse_bool(tokens[1], line);
  } else if (key == "@dimensions" || key == "@dimension") {
    require_arg(1);
    header.dims = parse_count(tokens[1], line);
  } else if (key == "@equallength") {
    require_arg(1);
    header.equal_length = parse_bool(tokens[1], line);
  } else if (key == "@serieslength") {
    require_arg(1);
    header.series_length = parse_count(tokens[1], line);
  } else if (key == "@classlabel") {
    require_arg(1);
    if (!parse_bool(tokens[1], line)) throw ParseError(line, "unlabelled datasets are not supported");
    for (std::size_t i = 2; i < tokens.size(); ++i) header.class_names.emplace_back(tokens[i]);
    if (header.class_names.empty()) throw ParseError(line, "@classLabel true lists no labels");
    header.has_class_label = true;
  } else {
    throw ParseError(line, "unknown directive '" + std::string(tokens.front()) + "'");
  }
}

}  // namespace

void Dataset::validate() const {
  if (instances.empty()) throw ArgumentError("dataset '" + name + "' has no instances");
  if (class_names.size() < 2) throw ArgumentError("dataset '" + name + "' needs at least two classes");
  for (const auto& s : instances) {
    if (s.dims() != dims || s.length() != length) {
      throw ArgumentError("dataset '" + name + "' has an instance of inconsistent shape");
    }
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size()) {
      throw ArgumentError("dataset '" + name + "' has a label outside class_names");
    }
  }
}

Dataset parse_ts(std::istream& in, const std::string& source_name, const ParseOptions& options) {
  Header header;
  Dataset dataset;
  bool in_data = false;
  std::size_t line_no = 0;
  std::size_t row_no = 0;
  std::vector<std::vector<std::vector<double>>> rows;
  std::vector<int> labels;

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto text = trim(raw);
    if (text.empty() || text.front() == '#') continue;

    if (!in_data) {
      if (text.front() != '@') throw ParseError(line_no, "expected a header directive before @data");
      if (lower(split_ws(text).front()) == "@data") {
        if (!header.has_class_label) throw ParseError(line_no, "@data reached without @classLabel");
        in_data = true;
        if (!header.dims && header.univariate) header.dims = 1;
        continue;
      }
      parse_directive(text, line_no, header);
      continue;
    }

    ++row_no;
    const auto fields = split(text, ':');
    if (fields.size() < 2) {
      throw StructuralError(row_no, "line " + std::to_string(line_no) + " has no class label field");
    }
    const std::size_t channels = fields.size() - 1;
    if (!header.dims) header.dims = channels;
    if (channels != *header.dims) {
      throw StructuralError(row_no, "expected " + std::to_string(*header.dims) +
                                        " dimensions, found " + std::to_string(channels));
    }

    const std::string label(trim(fields.back()));
    const auto it = std::find(header.class_names.begin(), header.class_names.end(), label);
    if (it == header.class_names.end()) {
      throw LabelError("row " + std::to_string(row_no) + ": unknown class label '" + label + "'");
    }

    std::vector<std::vector<double>> channel_values(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const auto field = trim(fields[c]);
      if (field.empty()) throw ParseError(line_no, "empty channel " + std::to_string(c));
      for (auto token : split(field, ',')) channel_values[c].push_back(parse_value(token, line_no));
      repair_missing(channel_values[c]);
      if (header.equal_length && header.series_length &&
          channel_values[c].size() != *header.series_length) {
        throw StructuralError(row_no, "channel " + std::to_string(c) + " has length " +
                                          std::to_string(channel_values[c].size()) +
                                          ", header declares " +
                                          std::to_string(*header.series_length));
      }
    }
    rows.push_back(std::move(channel_values));
    labels.push_back(static_cast<int>(it - header.class_names.begin()));
  }
  if (!in_data) throw ParseError(line_no, "missing @data section in " + source_name);

  std::size_t length = options.min_length;
  for (const auto& row : rows) {
    for (const auto& channel : row) length = std::max(length, channel.size());
  }

  dataset.name = header.problem_name.empty() ? source_name : header.problem_name;
  dataset.class_names = header.class_names;
  dataset.dims = header.dims.value_or(0);
  dataset.length = length;
  dataset.instances.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    MultivariateSeries s;
    s.label = labels[i];
    s.values.resize(static_cast<Eigen::Index>(dataset.dims), static_cast<Eigen::Index>(length));
    for (std::size_t c = 0; c < dataset.dims; ++c) {
      const auto& channel = rows[i][c];
      for (std::size_t t = 0; t < length; ++t) {
        s.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
            channel[std::min(t, channel.size() - 1)];
      }
    }
    dataset.instances.push_back(std::move(s));
  }
  return dataset;
}

Dataset parse_ts_file(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto dataset = parse_ts(in, path.stem().string(), options);
  const auto stem = path.stem().string();
  if (stem.ends_with("_TEST")) dataset.split = Split::kTest;
  return dataset;
}

void write_ts(const Dataset& dataset, std::ostream& out) {
  out << "@problemName " << dataset.name << "\n"
      << "@timeStamps false\n"
      << "@missing false\n"
      << "@univariate " << (dataset.dims == 1 ? "true" : "false") << "\n"
      << "@dimensions " << dataset.dims << "\n"
      << "@equalLength true\n"
      << "@seriesLength " << dataset.length << "\n"
      << "@classLabel true";
  for (const auto& c : dataset.class_names) out << ' ' << c;
  out << "\n@data\n";

  char buf[64];
  for (const auto& s : dataset.instances) {
    for (Eigen::Index c = 0; c < s.values.rows(); ++c) {
      for (Eigen::Index t = 0; t < s.values.cols(); ++t) {
        if (t > 0) out << ',';
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), s.values(c, t));
        out.write(buf, ptr - buf);
      }
      out << ':';
    }
    out << dataset.class_names.at(static_cast<std::size_t>(s.label)) << '\n';
  }
}

void pad_to_length(Dataset& dataset, std::size_t length) {
  if (length <= dataset.length) return;
  for (auto& s : dataset.instances) {
    const auto old_len = s.values.cols();
    Matrix<double> padded(s.values.rows(), static_cast<Eigen::Index>(length));
    padded.leftCols(old_len) = s.values;
    for (Eigen::Index c = 0; c < padded.rows(); ++c) {
      padded.row(c).tail(static_cast<Eigen::Index>(length) - old_len).setConstant(s.values(c, old_len - 1));
    }
    s.values = std::move(padded);
  }
  dataset.length = length;
}

MultivariateSeries znormalize_instance(const MultivariateSeries& series) {
  MultivariateSeries out = series;
  const auto n = static_cast<double>(series.values.cols());
  for (Eigen::Index c = 0; c < out.values.rows(); ++c) {
    auto row = out.values.row(c);
    const double mean = row.sum() / n;
    row.array() -= mean;
    const double stddev = std::sqrt(row.squaredNorm() / n);
    // Tolerance relative to the channel mean catches float round-off on
    // constant channels.
    if (stddev <= 1e-12 * std::max(1.0, std::abs(mean))) {
      row.setZero();
    } else {
      row /= stddev;
    }
  }
  return out;
}

void znormalize(Dataset& dataset) {
  for (auto& s : dataset.instances) s = znormalize_instance(s);
}

std::filesystem::path dataset_file(const std::filesystem::path& root, const std::string& name,
                                   Split split) {
  return root / name / (name + (split == Split::kTrain ? "_TRAIN.ts" : "_TEST.ts"));
}

bool dataset_present(const std::filesystem::path& root, const std::string& name) {
  return std::filesystem::exists(dataset_file(root, name, Split::kTrain)) &&
         std::filesystem::exists(dataset_file(root, name, Split::kTest));
}

DatasetPair load_dataset_pair(const std::filesystem::path& root, const std::string& name,
                              bool normalize) {
  DatasetPair pair;
  pair.train = parse_ts_file(dataset_file(root, name, Split::kTrain));
  pair.test = parse_ts_file(dataset_file(root, name, Split::kTest));
  pair.train.split = Split::kTrain;
  pair.test.split = Split::kTest;
  if (pair.train.class_names != pair.test.class_names) {
    throw LabelError("dataset '" + name + "': train and test splits declare different class labels");
  }
  if (pair.train.dims != pair.test.dims) {
    throw StructuralError(0, "dataset '" + name + "': train and test splits differ in dimensions");
  }
  const auto length = std::max(pair.train.length, pair.test.length);
  pad_to_length(pair.train, length);
  pad_to_length(pair.test, length);
  pair.train.validate();
  pair.test.validate();
  if (normalize) {
    znormalize(pair.train);
    znormalize(pair.test);
  }
  return pair;
}

DatasetStats dataset_stats(const Dataset& train, const Dataset& test) {
  train.validate();
  test.validate();
  return {train.size(), test.size(), train.dims, std::max(train.length, test.length),
          train.num_classes()};
}

const std::vector<ReferenceStats>& uea_reference_stats() {
  static const std::vector<ReferenceStats> table = {
      {"EC", "EthanolConcentration", {261, 263, 3, 1751, 4}},
      {"FD", "FaceDetection", {5890, 3524, 144, 62, 2}},
      {"HW", "Handwriting", {150, 850, 3, 152, 26}},
      {"HB", "Heartbeat", {204, 205, 61, 405, 2}},
      {"JV", "JapaneseVowels", {270, 370, 12, 29, 9}},
      {"PS", "PEMS-SF", {267, 173, 963, 144, 7}},
      {"SCP1", "SelfRegulationSCP1", {268, 293, 6, 896, 2}},
      {"SCP2", "SelfRegulationSCP2", {200, 180, 7, 1152, 2}},
      {"SAD", "SpokenArabicDigits", {6599, 2199, 13, 93, 10}},
      {"UGL", "UWaveGestureLibrary", {120, 320, 3, 315, 8}},
  };
  return table;
}

std::optional<DatasetStats> reference_stats_for(const std::string& name) {
  for (const auto& r : uea_reference_stats()) {
    if (name == r.name || name == r.abbreviation) return r.stats;
  }
  return std::nullopt;
}

}  // namespace llmfew
