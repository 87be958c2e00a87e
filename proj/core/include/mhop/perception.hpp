#pragma once

#include <cstdint>
#include <vector>

#include "mhop/box.hpp"
#include "mhop/world.hpp"

// Synthetic detector. Produces what a set-prediction detector would: N
// unordered observations per frame, padded with "none" entries.
namespace mhop::perception {

struct Observation {
  std::vector<double> class_probs;  // world::kNumClasses entries, sums to 1
  Box box{};
  std::vector<double> embed;
  int source = -1;  // ground-truth object id, -1 for pads; never read by the model

  int argmax_class() const;
  bool is_none() const { return argmax_class() == world::kNoneClass; }
};

struct FrameObservationSet {
  std::vector<Observation> obs;  // always exactly N entries
};

struct NoiseConfig {
  double prob_swap = 0.0;   // per frame: two observations exchange class_probs
  double prob_drop = 0.0;   // per visible object: replaced by a pad
  double embed_sigma = 0.0;
  double label_temp = 0.0;  // 0 gives exact one-hots
  // Cones report "snitch" while the real snitch is hidden.
  bool hallucinate_snitch = false;
};

// Attribute one-hot widths: shape, size, material, color, row, col.
inline constexpr int kAttributeWidth = world::kNumShapes + world::kNumSizes + world::kNumMaterials +
                                       world::kNumColors + 2 * world::kGridSide;

struct DecodedAttributes {
  int shape = 0, size = 0, material = 0, color = 0, row = 0, col = 0;
  friend bool operator==(const DecodedAttributes&, const DecodedAttributes&) = default;
};

// Fixed projection of attribute one-hots into d dims: orthonormal columns
// when d >= 30, otherwise a scaled Gaussian projection.
class AttributeEncoder {
 public:
  AttributeEncoder(std::size_t d, std::uint64_t seed);

  std::size_t dim() const { return d_; }
  std::vector<double> encode(const world::WorldObject& object, world::Cell cell) const;
  DecodedAttributes decode(const std::vector<double>& embed) const;
  const std::vector<double>& empty_scene() const { return empty_; }

 private:
  std::size_t d_;
  std::vector<double> proj_;  // d x kAttributeWidth, row-major
  std::vector<double> empty_;
};

// Class-probability vector: softmax(onehot / temp), exact one-hot at temp 0.
std::vector<double> soft_one_hot(int cls, double temp);

FrameObservationSet observe(const world::Episode& episode, int frame, std::size_t N, const NoiseConfig& noise,
                            const AttributeEncoder& encoder, std::uint64_t seed);

// Mean attribute encoding of the visible objects (order-free), or the
// encoder's empty-scene vector when nothing is visible.
std::vector<double> frame_embedding(const world::Episode& episode, int frame, const AttributeEncoder& encoder);
// Same pooling over the non-pad observations of a detector output.
std::vector<double> frame_embedding(const FrameObservationSet& frame, const AttributeEncoder& encoder);

}  // namespace mhop::perception
