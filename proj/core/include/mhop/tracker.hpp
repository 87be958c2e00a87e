#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mhop/perception.hpp"

namespace mhop::tracker {

using perception::FrameObservationSet;
using perception::Observation;

struct TrackCostWeights {
  double lambda_c = 1.0;
  double lambda_b = 0.0;
  // L_box = l1 * |b_a - b_b|_1 + giou * (1 - GIoU)
  double l1 = 1.0;
  double giou = 1.0;
};

// N object tracks of T observations each, plus the frame track. Token i of
// the flattened object tracks is (track i / T, frame i % T).
struct TrackSet {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<std::vector<Observation>> tracks;       // [N][T]
  std::vector<std::vector<double>> frame_features;    // [T][d]
  std::vector<std::vector<int>> source_index;         // [T][N]: slot in that frame's observation set

  const Observation& at(std::size_t track, std::size_t frame) const { return tracks[track][frame]; }
};

struct TrackFrame {
  std::size_t track = 0;
  std::size_t frame = 0;
  std::size_t token(std::size_t T) const { return track * T + frame; }
  friend bool operator==(const TrackFrame&, const TrackFrame&) = default;
};

double box_loss(const Box& a, const Box& b, const TrackCostWeights& w);
double track_cost(const Observation& a, const Observation& b, const TrackCostWeights& w);

// sigma[i] = slot of `next` continuing slot i of `prev`.
std::vector<int> match_frames(const FrameObservationSet& prev, const FrameObservationSet& next,
                              const TrackCostWeights& w);

// Chains the per-boundary matchings. With `associate` false every frame
// keeps its raw slot order (the "no tracking" ablation).
TrackSet build_tracks(const std::vector<FrameObservationSet>& frames,
                      const std::vector<std::vector<double>>& frame_features, const TrackCostWeights& w,
                      bool associate = true);

// NT flags, track-major: a non-pad observation whose box is not completely
// contained by another non-pad box of the same frame.
std::vector<std::uint8_t> visibility_map(const TrackSet& tracks);

// Latest visible snitch-classed observation; ties at one frame go to the
// highest snitch likelihood, then the lowest track.
std::optional<TrackFrame> last_visible_snitch(const TrackSet& tracks, const std::vector<std::uint8_t>& V);

// In the next frame, the non-pad observation whose box bottom midpoint is
// L1-closest to the snitch's.
std::optional<TrackFrame> immediate_container(const TrackSet& tracks, TrackFrame snitch_at);

// Majority-vote snitch track; its last non-pad box bottom midpoint on the grid.
int tracking_baseline(const TrackSet& tracks);

// Fraction of non-pad observations whose source object is their track's
// majority source.
double purity(const TrackSet& tracks);

}  // namespace mhop::tracker
