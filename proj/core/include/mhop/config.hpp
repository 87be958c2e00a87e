#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mhop/dataset.hpp"
#include "mhop/model.hpp"
#include "mhop/training.hpp"
#include "mhop/world.hpp"

namespace mhop {

// Everything a run depends on. Stored as one JSON document; every key is
// optional and falls back to the defaults below.
struct RunConfig {
  std::uint64_t seed = 1;
  // dataset
  world::WorldConfig world;
  int per_bin = 220;
  double train_fraction = 0.7;
  data::DatasetOptions data;
  // model and training
  ModelConfig model;
  train::TrainConfig train;
  // last-frame probe
  int baseline_epochs = 15;
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

// Copies shared settings into place (frame count, widths, min hops, seeds)
// so the sub-configs agree with each other.
void reconcile(RunConfig& config);

}  // namespace mhop
