#include "llmfew/array_io.hpp"

#include "llmfew/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace llmfew {

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'F', 'W', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  } else {
    return v;
  }
}

template <typename U>
void put(std::ostream& out, U v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::filesystem::path& path) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) {
    throw CheckpointError("truncated array file " + path.string());
  }
  return to_little(v);
}

}  // namespace

void write_array(const std::filesystem::path& path, const FloatArray& array) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(array.shape.size()));
  for (auto d : array.shape) put<std::uint64_t>(out, d);
  for (float v : array.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("failed writing " + path.string());
}

FloatArray read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError(path.string() + " is not a weight array file");
  if (get<std::uint32_t>(in, path) != kVersion) throw CheckpointError("unsupported array version in " + path.string());
  const auto rank = get<std::uint32_t>(in, path);
  if (rank > 8) throw CheckpointError("implausible rank in " + path.string());
  FloatArray array;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    array.shape.push_back(get<std::uint64_t>(in, path));
    count *= array.shape.back();
  }
  if (count > (std::uint64_t{1} << 34)) throw CheckpointError("implausible size in " + path.string());
  array.data.resize(static_cast<std::size_t>(count));
  for (auto& v : array.data) v = std::bit_cast<float>(get<std::uint32_t>(in, path));
  return array;
}

void write_meta(const std::filesystem::path& path, const MetaMap& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [key, value] : meta) out << key << ' ' << value << '\n';
}

MetaMap read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  MetaMap meta;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string key, value;
    fields >> key;
    std::getline(fields >> std::ws, value);
    while (!value.empty() && (value.back() == '\r' || value.back() == ' ')) value.pop_back();
    if (!key.empty()) meta[key] = value;
  }
  return meta;
}

template <typename T>
void save_parameters(const std::filesystem::path& dir, const ParameterRefs<T>& params) {
  std::filesystem::create_directories(dir);
  for (const auto* p : params) write_array(dir / (p->name + ".bin"), to_float_array(p->value));
}

template void save_parameters<float>(const std::filesystem::path&, const ParameterRefs<float>&);
template void save_parameters<double>(const std::filesystem::path&, const ParameterRefs<double>&);

}  // namespace llmfew
