#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mhop/dataset.hpp"
#include "mhop/hungarian.hpp"
#include "mhop/tracker.hpp"

using namespace mhop;
using namespace mhop::tracker;

namespace {

Observation obs(int cls, Box box = {0.4, 0.4, 0.5, 0.5}, double temp = 0.0) {
  Observation o;
  o.class_probs = perception::soft_one_hot(cls, temp);
  o.box = box;
  return o;
}

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// GIoU from explicit areas: intersection, union, enclosing hull.
double giou_oracle(const Box& a, const Box& b) {
  const double inter = interval_overlap(a.x1, a.x2, b.x1, b.x2) * interval_overlap(a.y1, a.y2, b.y1, b.y2);
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  const double uni = area_a + area_b - inter;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  return inter / uni - (hull - uni) / hull;
}

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return {x1, y1, x2, y2};
}

std::vector<perception::FrameObservationSet> observe_all(const world::Episode& ep, std::size_t N,
                                                          const perception::NoiseConfig& noise,
                                                          const perception::AttributeEncoder& enc) {
  std::vector<perception::FrameObservationSet> frames;
  for (int t = 0; t < ep.T(); ++t) frames.push_back(perception::observe(ep, t, N, noise, enc, ep.seed * 31 + t));
  return frames;
}

TrackSet tracks_for(const world::Episode& ep, std::size_t N, const perception::NoiseConfig& noise = {}) {
  const perception::AttributeEncoder enc(32, 7);
  const auto frames = observe_all(ep, N, noise, enc);
  return build_tracks(frames, std::vector<std::vector<double>>(frames.size()), TrackCostWeights{});
}

}  // namespace

TEST(Hungarian, SmallExamples) {
  const auto id = solve_assignment({-1, 0, 0, 0, -1, 0, 0, 0, -1}, 3);
  EXPECT_EQ(id.col_of_row, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(id.cost, -3.0);
  const auto sw = solve_assignment({0, -5, -5, 0}, 2);
  EXPECT_EQ(sw.col_of_row, (std::vector<int>{1, 0}));
  EXPECT_EQ(sw.cost, -10.0);
  // All-equal costs: the lexicographically smallest permutation.
  EXPECT_EQ(solve_assignment(std::vector<double>(16, 0.0), 4).col_of_row, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_THROW(solve_assignment({0, NAN, 0, 0}, 2), std::invalid_argument);
}

TEST(Hungarian, MatchesBruteForceOnRandomMatrices) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_int_distribution<int> small(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng);
    std::vector<double> cost(static_cast<std::size_t>(n * n));
    // Every other instance uses a few integer levels so ties are common.
    for (auto& c : cost) c = trial % 2 ? static_cast<double>(small(rng)) : val(rng);
    const auto h = solve_assignment(cost, n);
    const auto b = brute_force_assignment(cost, n);
    EXPECT_EQ(h.cost, b.cost) << "trial " << trial;
    std::vector<int> sorted = h.col_of_row;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
    // Brute force enumerates in lexicographic order and keeps the first minimum.
    if (trial % 2) EXPECT_EQ(h.col_of_row, b.col_of_row) << "trial " << trial;
  }
}

TEST(Giou, Examples) {
  const Box a{0.1, 0.2, 0.4, 0.6};
  EXPECT_DOUBLE_EQ(giou(a, a), 1.0);
  const Box p{0.0, 0.0, 1e-4, 1e-4}, q{1.0 - 1e-4, 1.0 - 1e-4, 1.0, 1.0};
  EXPECT_LT(giou(p, q), -0.999);
  EXPECT_GT(giou(p, q), -1.0);
  const Box point{0.3, 0.3, 0.3, 0.3};
  EXPECT_LE(giou(point, a), 0.0);
  EXPECT_EQ(giou(point, point), 0.0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_box(rng), y = random_box(rng);
    EXPECT_NEAR(giou(x, y), giou_oracle(x, y), 1e-12);
    EXPECT_NEAR(box_iou(x, y) - giou(x, y), box_iou(x, y) - giou_oracle(x, y), 1e-12);
  }
}

TEST(TrackCost, Examples) {
  TrackCostWeights w;
  const auto none = obs(world::kNoneClass);
  EXPECT_EQ(track_cost(none, obs(5), w), 0.0);
  EXPECT_EQ(track_cost(none, none, w), 0.0);
  auto b = obs(5);
  std::fill(b.class_probs.begin(), b.class_probs.end(), 0.0);
  b.class_probs[7] = 0.9;
  b.class_probs[8] = 0.1;
  EXPECT_DOUBLE_EQ(track_cost(obs(7), b, w), -0.9);
  TrackCostWeights wb{1.0, 1.0, 1.0, 1.0};
  const auto same = obs(7);
  EXPECT_DOUBLE_EQ(box_loss(same.box, same.box, wb), 0.0);
  EXPECT_DOUBLE_EQ(track_cost(same, same, wb), -1.0);
  const Box a{0.1, 0.1, 0.2, 0.2}, c{0.3, 0.1, 0.4, 0.2};
  EXPECT_NEAR(box_loss(a, c, wb), 0.4 + 1.0 - giou_oracle(a, c), 1e-12);
}

TEST(MatchFrames, BoxesIgnoredWithoutBoxWeight) {
  std::mt19937_64 rng(9);
  perception::FrameObservationSet prev, next, moved;
  for (int k = 0; k < 5; ++k) {
    prev.obs.push_back(obs(10 + k, random_box(rng), 0.3));
    next.obs.push_back(obs(14 - k, random_box(rng), 0.3));
  }
  moved = next;
  for (auto& o : moved.obs) o.box = random_box(rng);
  const auto s1 = match_frames(prev, next, TrackCostWeights{});
  EXPECT_EQ(s1, match_frames(prev, moved, TrackCostWeights{}));
  EXPECT_EQ(s1, (std::vector<int>{4, 3, 2, 1, 0}));
}

TEST(BuildTracks, SingleObjectAndPureScenes) {
  world::WorldConfig cfg;
  cfg.w_contain = 0.0;  // nothing is ever hidden, so no track has to re-acquire an object
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto ep = world::simulate(seed, cfg);
    const auto ts = tracks_for(ep, 6);
    EXPECT_EQ(purity(ts), 1.0) << "seed " << seed;
    for (const auto& track : ts.tracks) {
      for (const auto& o : track) EXPECT_EQ(o.argmax_class(), track[0].argmax_class());
      if (track[0].source >= 0) {
        for (const auto& o : track) EXPECT_EQ(o.source, track[0].source);
      }
    }
    // Every frame's observation set is partitioned across the tracks.
    for (std::size_t t = 0; t < ts.T; ++t) {
      auto idx = ts.source_index[t];
      std::sort(idx.begin(), idx.end());
      for (std::size_t k = 0; k < ts.N; ++k) EXPECT_EQ(idx[k], static_cast<int>(k));
    }
  }
  // One object plus pads.
  perception::FrameObservationSet f;
  for (int k = 0; k < 3; ++k) f.obs.push_back(obs(k == 1 ? 12 : world::kNoneClass));
  auto g = f;
  std::swap(g.obs[0], g.obs[1]);
  const auto ts = build_tracks({f, g, f}, {{}, {}, {}}, TrackCostWeights{});
  for (const auto& o : ts.tracks[1]) EXPECT_EQ(o.argmax_class(), 12);
}

TEST(BuildTracks, SwapNoiseDegradesPurity) {
  perception::NoiseConfig noisy;
  noisy.prob_swap = 0.5;
  double clean = 0.0, swapped = 0.0;
  world::WorldConfig cfg;
  cfg.w_contain = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ep = world::simulate(seed, cfg);
    clean += purity(tracks_for(ep, 6));
    swapped += purity(tracks_for(ep, 6, noisy));
  }
  std::cout << "purity clean " << clean / 50 << ", prob_swap 0.5 " << swapped / 50 << "\n";
  EXPECT_LT(swapped, clean);
}

TEST(VisibilityMap, FollowsBoxContainment) {
  perception::FrameObservationSet f;
  f.obs = {obs(3, {0.1, 0.1, 0.2, 0.2}), obs(0, {0.5, 0.5, 0.55, 0.55}), obs(40, {0.45, 0.45, 0.6, 0.6}),
           obs(60, {0.15, 0.15, 0.3, 0.3}), obs(world::kNoneClass, {0.0, 0.0, 1.0, 1.0})};
  const auto ts = build_tracks({f}, {{}}, TrackCostWeights{}, false);
  const auto V = visibility_map(ts);
  EXPECT_EQ(V, (std::vector<std::uint8_t>{1, 0, 1, 1, 0}));
}

TEST(Heuristics, SyntheticExamples) {
  // Snitch in track 0 visible at frames 0..1, then absorbed by the cone in track 1.
  auto frame = [](bool snitch_visible) {
    perception::FrameObservationSet f;
    f.obs = {snitch_visible ? obs(0, {0.40, 0.25, 0.45, 0.30}) : obs(world::kNoneClass),
             obs(100, {0.35, 0.35, 0.5, 0.5}), obs(50, {0.40, 0.53, 0.45, 0.58}),
             obs(70, {0.40, 0.75, 0.45, 0.80})};
    return f;
  };
  const auto ts = build_tracks({frame(true), frame(true), frame(false), frame(false)}, {{}, {}, {}, {}},
                               TrackCostWeights{}, false);
  const auto V = visibility_map(ts);
  const auto lv = last_visible_snitch(ts, V);
  ASSERT_TRUE(lv);
  EXPECT_EQ(*lv, (TrackFrame{0, 1}));
  // Bottom midpoints: snitch (0.425, 0.30); cone (0.425, 0.50) at 0.2; cube (0.425, 0.58) at 0.28.
  const auto ic = immediate_container(ts, *lv);
  ASSERT_TRUE(ic);
  EXPECT_EQ(*ic, (TrackFrame{1, 2}));
  EXPECT_FALSE(immediate_container(ts, {0, 3}));

  perception::FrameObservationSet empty;
  empty.obs = {obs(world::kNoneClass), obs(4)};
  const auto none = build_tracks({empty}, {{}}, TrackCostWeights{});
  EXPECT_FALSE(last_visible_snitch(none, visibility_map(none)));
}

TEST(Heuristics, LastVisibleSnitchMatchesGroundTruth) {
  const perception::AttributeEncoder enc(32, 7);
  data::DatasetOptions opt;
  opt.N = 10;
  std::size_t containments = 0, carrier_hits = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto ep = world::simulate(seed, world::WorldConfig{});
    const auto ts = data::episode_tracks(ep, enc, opt);
    const auto V = visibility_map(ts);
    const auto lv = last_visible_snitch(ts, V);
    ASSERT_TRUE(lv);
    ASSERT_EQ(static_cast<int>(lv->frame), ep.last_visible_frame) << "seed " << seed;
    if (ep.chain.size() >= 2) {
      ++containments;
      const auto ic = immediate_container(ts, *lv);
      ASSERT_TRUE(ic);
      carrier_hits += ts.at(ic->track, ic->frame).source == ep.chain[1].object;
    }
  }
  const double rate = static_cast<double>(carrier_hits) / static_cast<double>(containments);
  std::cout << "immediate container matches the first carrier in " << carrier_hits << "/" << containments << "\n";
  EXPECT_GE(rate, 0.95);
}

TEST(TrackingBaseline, StaticSnitchIsFound) {
  world::InitialLayout l;
  l.objects.resize(3);
  l.objects[0].shape = world::ObjectShape::snitch;
  l.objects[1].id = 1;
  l.objects[1].shape = world::ObjectShape::cube;
  l.objects[2].id = 2;
  l.objects[2].shape = world::ObjectShape::cone;
  l.objects[2].size = world::ObjectSize::large;
  l.cells = {{4, 2}, {0, 0}, {5, 5}};
  const auto ep = world::replay(l, {{3, 1, world::ActionKind::slide, -1, {1, 1}}}, 13);
  EXPECT_EQ(tracking_baseline(tracks_for(ep, 6)), ep.label);
  // Carried away under the cone: the track stops at the pick-up point.
  const auto carried = world::replay(
      l, {{3, 2, world::ActionKind::contain, 0, {}}, {5, 2, world::ActionKind::slide, -1, {0, 5}}}, 13);
  EXPECT_EQ(tracking_baseline(tracks_for(carried, 6)), world::grid_class(world::cell_center({4, 2})));
  EXPECT_NE(carried.label, world::grid_class(world::cell_center({4, 2})));
}
