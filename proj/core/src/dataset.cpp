#include "mhop/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace mhop::data {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 step over the combined value
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

int required_hops(const world::Episode& ep, int min_hops) {
  const int feasible = std::min(min_hops, ep.T() - ep.last_visible_frame);
  return std::max(static_cast<int>(ep.chain.size()), feasible);
}

tracker::TrackSet episode_tracks(const world::Episode& ep, const perception::AttributeEncoder& encoder,
                                 const DatasetOptions& opt) {
  std::vector<perception::FrameObservationSet> frames;
  std::vector<std::vector<double>> features;
  for (int t = 0; t < ep.T(); ++t) {
    frames.push_back(perception::observe(ep, t, opt.N, opt.noise, encoder,
                                         mix(mix(opt.observe_seed, ep.seed), static_cast<std::uint64_t>(t))));
    features.push_back(perception::frame_embedding(frames.back(), encoder));
  }
  return tracker::build_tracks(frames, features, opt.weights, opt.tracking);
}

Sample make_sample(const world::Episode& ep, const perception::AttributeEncoder& encoder,
                   const DatasetOptions& opt) {
  if (encoder.dim() != opt.d) throw std::invalid_argument("make_sample: encoder width differs from d");
  const auto ts = episode_tracks(ep, encoder, opt);
  Sample s;
  s.N = ts.N;
  s.T = ts.T;
  s.d = opt.d;
  s.objects.reserve(s.N * s.T * s.d);
  for (std::size_t k = 0; k < s.N; ++k) {
    for (std::size_t t = 0; t < s.T; ++t) {
      const auto& e = ts.tracks[k][t].embed;
      s.objects.insert(s.objects.end(), e.begin(), e.end());
    }
  }
  for (const auto& f : ts.frame_features) s.frames.insert(s.frames.end(), f.begin(), f.end());
  s.visible = tracker::visibility_map(ts);
  s.label = ep.label;
  s.bin = ep.last_visible_frame;
  s.episode_seed = ep.seed;
  if (const auto lv = tracker::last_visible_snitch(ts, s.visible)) {
    s.hop1_token = static_cast<long>(lv->token(s.T));
    s.hop1_frame = static_cast<int>(lv->frame);
    if (const auto c = tracker::immediate_container(ts, *lv)) {
      s.hop2_token = static_cast<long>(c->token(s.T));
      s.hop2_frame = static_cast<int>(c->frame);
    }
  }
  s.tracking_prediction = tracker::tracking_baseline(ts);
  s.chain_length = static_cast<int>(ep.chain.size());
  s.required_hops = required_hops(ep, opt.min_hops);
  return s;
}

std::vector<Sample> make_samples(const world::DatasetManifest& m, world::Split split, const DatasetOptions& opt) {
  const perception::AttributeEncoder encoder(opt.d, opt.encoder_seed);
  std::vector<Sample> out;
  for (const auto i : m.indices(split)) out.push_back(make_sample(m.episodes[i], encoder, opt));
  return out;
}

Sample last_frame_view(const Sample& s) {
  Sample v = s;
  v.T = 1;
  v.objects.clear();
  v.visible.clear();
  for (std::size_t k = 0; k < s.N; ++k) {
    const auto row = k * s.T + s.T - 1;
    v.objects.insert(v.objects.end(), s.objects.begin() + static_cast<long>(row * s.d),
                     s.objects.begin() + static_cast<long>((row + 1) * s.d));
    v.visible.push_back(s.visible[row]);
  }
  v.frames.assign(s.frames.end() - static_cast<long>(s.d), s.frames.end());
  v.hop1_token = v.hop2_token = -1;
  v.hop1_frame = v.hop2_frame = -1;
  return v;
}

}  // namespace mhop::data
