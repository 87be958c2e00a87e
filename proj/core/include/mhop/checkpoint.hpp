#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhop/optim.hpp"

namespace mhop {

// Text checkpoint, one tensor per two lines:
//
//   mhop-checkpoint 1 <tensor count>
//   <name> <rank> <extent>...
//   <16 hex digits per value, IEEE-754 bit pattern, space separated>
//
// Values round-trip bit-exactly.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_checkpoint(std::ostream& os, const ParameterSet& params);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);

std::vector<CheckpointEntry> read_checkpoint(std::istream& is);
// Loads into an existing set; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace mhop
