#include "mhop/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mhop/hungarian.hpp"

namespace mhop::tracker {

using world::kNoneClass;
using world::kSnitchClass;

double box_loss(const Box& a, const Box& b, const TrackCostWeights& w) {
  return w.l1 * box_l1(a, b) + w.giou * (1.0 - giou(a, b));
}

double track_cost(const Observation& a, const Observation& b, const TrackCostWeights& w) {
  const int ca = a.argmax_class();
  if (ca == kNoneClass) return 0.0;
  double c = -w.lambda_c * b.class_probs.at(static_cast<std::size_t>(ca));
  if (w.lambda_b != 0.0) c += w.lambda_b * box_loss(a.box, b.box, w);
  return c;
}

std::vector<int> match_frames(const FrameObservationSet& prev, const FrameObservationSet& next,
                              const TrackCostWeights& w) {
  const auto n = prev.obs.size();
  if (next.obs.size() != n) throw std::invalid_argument("match_frames: frames differ in slot count");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = track_cost(prev.obs[i], next.obs[j], w);
  }
  return solve_assignment(cost, static_cast<int>(n)).col_of_row;
}

TrackSet build_tracks(const std::vector<FrameObservationSet>& frames,
                      const std::vector<std::vector<double>>& frame_features, const TrackCostWeights& w,
                      bool associate) {
  if (frames.empty()) throw std::invalid_argument("build_tracks: no frames");
  if (frame_features.size() != frames.size()) throw std::invalid_argument("build_tracks: one frame feature per frame");
  TrackSet ts;
  ts.T = frames.size();
  ts.N = frames[0].obs.size();
  ts.frame_features = frame_features;
  ts.tracks.assign(ts.N, std::vector<Observation>(ts.T));
  ts.source_index.assign(ts.T, std::vector<int>(ts.N));
  std::vector<int> slot(ts.N);
  for (std::size_t k = 0; k < ts.N; ++k) slot[k] = static_cast<int>(k);
  for (std::size_t t = 0; t < ts.T; ++t) {
    if (frames[t].obs.size() != ts.N) throw std::invalid_argument("build_tracks: frames differ in slot count");
    if (t > 0 && associate) {
      const auto sigma = match_frames(frames[t - 1], frames[t], w);
      for (auto& s : slot) s = sigma[static_cast<std::size_t>(s)];
    }
    for (std::size_t k = 0; k < ts.N; ++k) {
      ts.tracks[k][t] = frames[t].obs[static_cast<std::size_t>(slot[k])];
      ts.source_index[t][k] = slot[k];
    }
  }
  return ts;
}

std::vector<std::uint8_t> visibility_map(const TrackSet& ts) {
  std::vector<std::uint8_t> V(ts.N * ts.T, 0);
  for (std::size_t t = 0; t < ts.T; ++t) {
    for (std::size_t k = 0; k < ts.N; ++k) {
      const auto& o = ts.tracks[k][t];
      if (o.is_none()) continue;
      bool vis = true;
      for (std::size_t j = 0; j < ts.N && vis; ++j) {
        const auto& other = ts.tracks[j][t];
        if (j == k || other.is_none()) continue;
        if (box_contains(other.box, o.box) && !(other.box == o.box && j > k)) vis = false;
      }
      V[k * ts.T + t] = vis ? 1 : 0;
    }
  }
  return V;
}

std::optional<TrackFrame> last_visible_snitch(const TrackSet& ts, const std::vector<std::uint8_t>& V) {
  if (V.size() != ts.N * ts.T) throw std::invalid_argument("last_visible_snitch: visibility map size");
  for (std::size_t t = ts.T; t-- > 0;) {
    std::optional<TrackFrame> best;
    double best_p = -1.0;
    for (std::size_t k = 0; k < ts.N; ++k) {
      const auto& o = ts.tracks[k][t];
      if (!V[k * ts.T + t] || o.argmax_class() != kSnitchClass) continue;
      if (o.class_probs[kSnitchClass] > best_p) {
        best_p = o.class_probs[kSnitchClass];
        best = TrackFrame{k, t};
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

std::optional<TrackFrame> immediate_container(const TrackSet& ts, TrackFrame at) {
  if (at.frame + 1 >= ts.T) return std::nullopt;
  const auto ref = ts.tracks[at.track][at.frame].box.bottom_mid();
  std::optional<TrackFrame> best;
  double best_d = 0.0;
  for (std::size_t k = 0; k < ts.N; ++k) {
    const auto& o = ts.tracks[k][at.frame + 1];
    if (o.is_none()) continue;
    const auto p = o.box.bottom_mid();
    const double dist = std::fabs(p[0] - ref[0]) + std::fabs(p[1] - ref[1]);
    if (!best || dist < best_d) {
      best_d = dist;
      best = TrackFrame{k, at.frame + 1};
    }
  }
  return best;
}

int tracking_baseline(const TrackSet& ts) {
  std::size_t best = 0;
  int best_votes = -1;
  double best_mass = -1.0;
  for (std::size_t k = 0; k < ts.N; ++k) {
    int votes = 0;
    double mass = 0.0;
    for (const auto& o : ts.tracks[k]) {
      votes += o.argmax_class() == kSnitchClass ? 1 : 0;
      mass += o.class_probs[kSnitchClass];
    }
    if (votes > best_votes || (votes == best_votes && mass > best_mass)) {
      best = k;
      best_votes = votes;
      best_mass = mass;
    }
  }
  for (std::size_t t = ts.T; t-- > 0;) {
    const auto& o = ts.tracks[best][t];
    if (o.is_none()) continue;
    const auto bm = o.box.bottom_mid();
    auto p = world::plane_from_image(bm[0], bm[1]);
    p.x = std::clamp(p.x, -world::kPlaneHalf, world::kPlaneHalf);
    p.y = std::clamp(p.y, -world::kPlaneHalf, world::kPlaneHalf);
    return world::grid_class(p);
  }
  // The chosen track never saw anything: fall back to the plane centre.
  return world::grid_class({0.0, 0.0});
}

double purity(const TrackSet& ts) {
  std::size_t total = 0;
  std::size_t pure = 0;
  for (const auto& track : ts.tracks) {
    std::map<int, std::size_t> counts;
    for (const auto& o : track) {
      if (o.source >= 0) ++counts[o.source];
    }
    std::size_t top = 0;
    std::size_t n = 0;
    for (const auto& [src, c] : counts) {
      top = std::max(top, c);
      n += c;
    }
    total += n;
    pure += top;
  }
  return total == 0 ? 1.0 : static_cast<double>(pure) / static_cast<double>(total);
}

}  // namespace mhop::tracker
