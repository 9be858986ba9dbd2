#include "wave/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "wave/errors.hpp"

namespace wave {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, sizeof(U));
}

template <typename T>
bool get_le(std::istream& is, T& value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) return false;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  value = std::bit_cast<T>(bits);
  return true;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointEntry>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 8);
  for (const auto& e : entries) {
    if (shape_numel(e.shape) != e.values.size()) {
      throw ArgumentError("checkpoint entry '" + e.name + "' shape/value count mismatch");
    }
    put_le(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le(os, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put_le(os, static_cast<std::uint64_t>(d));
    for (double v : e.values) put_le(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError("not a WAVEKIT1 checkpoint: " + path.string());
  }
  std::vector<CheckpointEntry> entries;
  std::uint32_t name_len = 0;
  while (get_le(is, name_len)) {
    CheckpointEntry e;
    e.name.resize(name_len);
    std::uint32_t rank = 0;
    if (!is.read(e.name.data(), name_len) || !get_le(is, rank)) {
      throw IoError("truncated checkpoint entry in " + path.string());
    }
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint64_t d = 0;
      if (!get_le(is, d)) throw IoError("truncated checkpoint dims in " + path.string());
      e.shape.push_back(static_cast<std::size_t>(d));
    }
    e.values.resize(shape_numel(e.shape));
    for (auto& v : e.values) {
      if (!get_le(is, v)) throw IoError("truncated checkpoint values for '" + e.name + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const WaveModel& model, const std::filesystem::path& path) {
  std::vector<CheckpointEntry> entries;
  for (const auto& p : model.parameters()) {
    entries.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  write_checkpoint(path, entries);
}

void load_checkpoint(WaveModel& model, const std::filesystem::path& path) {
  std::map<std::string, CheckpointEntry> by_name;
  for (auto& e : read_checkpoint(path)) by_name.emplace(e.name, std::move(e));
  std::string errors;
  for (auto& p : model.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      errors += "missing '" + p.name + "'; ";
      continue;
    }
    if (it->second.shape != p.tensor.shape()) {
      errors += "shape of '" + p.name + "' is " + shape_to_string(it->second.shape) +
                ", model expects " + shape_to_string(p.tensor.shape()) + "; ";
    }
  }
  if (by_name.size() != model.parameters().size() && errors.empty()) {
    errors = "checkpoint holds parameters the model does not have";
  }
  if (!errors.empty()) throw ValidationError("checkpoint " + path.string() + ": " + errors);
  for (auto& p : model.parameters()) {
    const auto& values = by_name.at(p.name).values;
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
  }
}

}  // namespace wave
