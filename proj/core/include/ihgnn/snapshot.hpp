#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ihgnn/model.hpp"

namespace ihgnn {

// Everything needed to rebuild a trained model.
struct Snapshot {
  ModelConfig config;
  EntityCounts counts;
  std::uint32_t word_count{0};
  ParameterSet params;
};

// JSON container: format tag, config, counts and every tensor with its shape.
// Doubles are written with round-trip precision.
void write_snapshot(std::ostream& out, const Snapshot& snapshot);
void save_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);

// Throws DataError on malformed input and on any tensor whose shape disagrees
// with the declared config and counts.
Snapshot read_snapshot(std::istream& in);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace ihgnn
