#pragma once

#include <cstdint>
#include <vector>

#include "mhop/perception.hpp"
#include "mhop/tracker.hpp"
#include "mhop/world.hpp"

// Turns episodes into model inputs: observe every frame, associate tracks,
// and attach the heuristic hop targets.
namespace mhop::data {

struct DatasetOptions {
  std::size_t N = 6;   // detector slots per frame
  std::size_t d = 32;
  perception::NoiseConfig noise;
  tracker::TrackCostWeights weights;
  bool tracking = true;  // false: keep raw per-frame slot order
  std::uint64_t encoder_seed = 7;
  std::uint64_t observe_seed = 11;
  int min_hops = 5;      // for the required-hop diagnostic
};

struct Sample {
  std::size_t N = 0;
  std::size_t T = 0;
  std::size_t d = 0;
  std::vector<double> objects;         // [N*T, d], track-major
  std::vector<double> frames;          // [T, d]
  std::vector<std::uint8_t> visible;   // [N*T]
  int label = 0;
  int bin = 0;                         // ground-truth last visible frame
  std::uint64_t episode_seed = 0;
  // Heuristic targets from the tracks; -1 when unavailable.
  long hop1_token = -1;
  int hop1_frame = -1;
  long hop2_token = -1;
  int hop2_frame = -1;
  int tracking_prediction = 0;
  int chain_length = 0;
  int required_hops = 1;
};

// Ground-truth hop count used by the diagnostics:
// max(|chain|, min(min_hops, T - last_visible_frame)).
int required_hops(const world::Episode& episode, int min_hops);

Sample make_sample(const world::Episode& episode, const perception::AttributeEncoder& encoder,
                   const DatasetOptions& options);

std::vector<Sample> make_samples(const world::DatasetManifest& manifest, world::Split split,
                                 const DatasetOptions& options);

// Observations and tracks for one episode, as make_sample builds them.
tracker::TrackSet episode_tracks(const world::Episode& episode, const perception::AttributeEncoder& encoder,
                                 const DatasetOptions& options);

// Only the final frame: N object tokens and one frame token (T = 1).
Sample last_frame_view(const Sample& sample);

}  // namespace mhop::data
