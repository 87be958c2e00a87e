#include "mhop/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mhop::perception {

using namespace mhop::world;

namespace {

std::vector<double> one_hots(const WorldObject& o, Cell cell) {
  std::vector<double> v(kAttributeWidth, 0.0);
  int off = 0;
  v[off + static_cast<int>(o.shape)] = 1.0;
  off += kNumShapes;
  v[off + static_cast<int>(o.size)] = 1.0;
  off += kNumSizes;
  v[off + static_cast<int>(o.material)] = 1.0;
  off += kNumMaterials;
  v[off + static_cast<int>(o.color)] = 1.0;
  off += kNumColors;
  v[off + cell.row] = 1.0;
  off += kGridSide;
  v[off + cell.col] = 1.0;
  return v;
}

Cell cell_at(Vec2 p) { return cell_of_class(grid_class(p)); }

}  // namespace

int Observation::argmax_class() const {
  return static_cast<int>(std::max_element(class_probs.begin(), class_probs.end()) - class_probs.begin());
}

AttributeEncoder::AttributeEncoder(std::size_t d, std::uint64_t seed) : d_(d) {
  if (d == 0) throw std::invalid_argument("AttributeEncoder: d must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t w = kAttributeWidth;
  proj_.resize(d * w);
  for (auto& x : proj_) x = gauss(rng);
  if (d >= w) {
    // Gram-Schmidt on the columns.
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0.0;
        for (std::size_t r = 0; r < d; ++r) dot += proj_[r * w + c] * proj_[r * w + p];
        for (std::size_t r = 0; r < d; ++r) proj_[r * w + c] -= dot * proj_[r * w + p];
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < d; ++r) norm += proj_[r * w + c] * proj_[r * w + c];
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < d; ++r) proj_[r * w + c] /= norm;
    }
  } else {
    for (auto& x : proj_) x /= std::sqrt(static_cast<double>(d));
  }
  empty_.resize(d);
  for (auto& x : empty_) x = gauss(rng) / std::sqrt(static_cast<double>(d));
}

std::vector<double> AttributeEncoder::encode(const WorldObject& object, Cell cell) const {
  const auto h = one_hots(object, cell);
  const std::size_t w = kAttributeWidth;
  std::vector<double> out(d_, 0.0);
  for (std::size_t r = 0; r < d_; ++r) {
    for (std::size_t c = 0; c < w; ++c) out[r] += proj_[r * w + c] * h[c];
  }
  return out;
}

DecodedAttributes AttributeEncoder::decode(const std::vector<double>& embed) const {
  if (embed.size() != d_) throw std::invalid_argument("AttributeEncoder::decode: wrong width");
  const std::size_t w = kAttributeWidth;
  std::vector<double> score(w, 0.0);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < d_; ++r) score[c] += proj_[r * w + c] * embed[r];
  }
  auto best = [&](int off, int n) {
    return static_cast<int>(std::max_element(score.begin() + off, score.begin() + off + n) - (score.begin() + off));
  };
  DecodedAttributes a;
  int off = 0;
  a.shape = best(off, kNumShapes);
  off += kNumShapes;
  a.size = best(off, kNumSizes);
  off += kNumSizes;
  a.material = best(off, kNumMaterials);
  off += kNumMaterials;
  a.color = best(off, kNumColors);
  off += kNumColors;
  a.row = best(off, kGridSide);
  off += kGridSide;
  a.col = best(off, kGridSide);
  return a;
}

std::vector<double> soft_one_hot(int cls, double temp) {
  if (cls < 0 || cls >= kNumClasses) throw std::out_of_range("soft_one_hot: class out of range");
  std::vector<double> p(kNumClasses, 0.0);
  if (temp <= 0.0) {
    p[static_cast<std::size_t>(cls)] = 1.0;
    return p;
  }
  // softmax of onehot/temp: the hot entry gets e^(1/temp), the rest e^0.
  const double hot = std::exp(1.0 / temp);
  const double z = hot + (kNumClasses - 1);
  std::fill(p.begin(), p.end(), 1.0 / z);
  p[static_cast<std::size_t>(cls)] = hot / z;
  return p;
}

FrameObservationSet observe(const Episode& ep, int frame, std::size_t N, const NoiseConfig& noise,
                            const AttributeEncoder& encoder, std::uint64_t seed) {
  if (frame < 0 || frame >= ep.T()) throw std::out_of_range("observe: frame out of range");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(noise.prob_drop);
  std::normal_distribution<double> gauss(0.0, noise.embed_sigma);
  const auto& f = ep.frames[static_cast<std::size_t>(frame)];
  const bool snitch_hidden = !visible(ep.snitch, frame, ep);

  FrameObservationSet out;
  for (std::size_t i = 0; i < ep.objects.size(); ++i) {
    const int id = static_cast<int>(i);
    if (!visible(id, frame, ep)) continue;
    if (noise.prob_drop > 0.0 && drop(rng)) continue;
    const auto& obj = ep.objects[i];
    Observation o;
    int cls = obj.class_id();
    if (noise.hallucinate_snitch && snitch_hidden && obj.is_cone()) cls = kSnitchClass;
    o.class_probs = soft_one_hot(cls, noise.label_temp);
    o.box = f.boxes[i];
    o.embed = encoder.encode(obj, cell_at(f.pos[i]));
    if (noise.embed_sigma > 0.0) {
      for (auto& x : o.embed) x += gauss(rng);
    }
    o.source = id;
    out.obs.push_back(std::move(o));
  }
  if (out.obs.size() > N) throw std::invalid_argument("observe: more visible objects than detector slots");
  if (noise.prob_swap > 0.0 && out.obs.size() >= 2 && std::bernoulli_distribution(noise.prob_swap)(rng)) {
    std::uniform_int_distribution<std::size_t> pick(0, out.obs.size() - 1);
    const auto a = pick(rng);
    auto b = pick(rng);
    while (b == a) b = pick(rng);
    std::swap(out.obs[a].class_probs, out.obs[b].class_probs);
  }
  while (out.obs.size() < N) {
    Observation pad;
    pad.class_probs = soft_one_hot(kNoneClass, noise.label_temp);
    pad.embed.assign(encoder.dim(), 0.0);
    out.obs.push_back(std::move(pad));
  }
  std::shuffle(out.obs.begin(), out.obs.end(), rng);
  return out;
}

std::vector<double> frame_embedding(const Episode& ep, int frame, const AttributeEncoder& encoder) {
  if (frame < 0 || frame >= ep.T()) throw std::out_of_range("frame_embedding: frame out of range");
  const auto& f = ep.frames[static_cast<std::size_t>(frame)];
  std::vector<double> sum(encoder.dim(), 0.0);
  int count = 0;
  for (std::size_t i = 0; i < ep.objects.size(); ++i) {
    if (!visible(static_cast<int>(i), frame, ep)) continue;
    const auto e = encoder.encode(ep.objects[i], cell_at(f.pos[i]));
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += e[k];
    ++count;
  }
  if (count == 0) return encoder.empty_scene();
  for (auto& x : sum) x /= count;
  return sum;
}

std::vector<double> frame_embedding(const FrameObservationSet& frame, const AttributeEncoder& encoder) {
  std::vector<double> sum(encoder.dim(), 0.0);
  int count = 0;
  for (const auto& o : frame.obs) {
    if (o.is_none()) continue;
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += o.embed[k];
    ++count;
  }
  if (count == 0) return encoder.empty_scene();
  for (auto& x : sum) x /= count;
  return sum;
}

}  // namespace mhop::perception
