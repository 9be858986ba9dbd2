#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wave/model.hpp"
#include "wave/tensor.hpp"

namespace wave {

/// Checkpoint container, all integers little-endian:
///
///   "WAVEKIT1"                      8-byte magic
///   repeated until end of file:
///     u32  name length
///     ...  name bytes (UTF-8, no terminator)
///     u32  rank
///     u64  dims[rank]
///     f64  values[prod(dims)]       IEEE-754 binary64
inline constexpr char kCheckpointMagic[] = "WAVEKIT1";

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
  bool operator==(const CheckpointEntry&) const = default;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const WaveModel& model, const std::filesystem::path& path);
/// Every model parameter must be present with a matching shape; extra entries
/// are rejected. Throws IoError / ValidationError.
void load_checkpoint(WaveModel& model, const std::filesystem::path& path);

}  // namespace wave
