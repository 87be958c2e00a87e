#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhop/box.hpp"

// Procedural object-permanence world: objects on a 6x6 table act in time
// slots; cones can cover (and carry) strictly smaller objects, recursively.
// One frame is sampled per slot boundary, frame 0 being the initial layout.
namespace mhop::world {

inline constexpr int kGridSide = 6;
inline constexpr int kGridCells = kGridSide * kGridSide;
inline constexpr double kPlaneHalf = 3.0;  // plane spans [-3, 3] on both axes
inline constexpr int kMaxObjects = 10;
inline constexpr int kDefaultFrames = 13;

enum class ObjectShape { cube, sphere, cylinder, cone, snitch };
enum class ObjectSize { small, medium, large };
enum class Material { metal, rubber };
enum class Color { gray, red, blue, green, brown, purple, cyan, yellow };

inline constexpr int kNumShapes = 5;
inline constexpr int kNumSizes = 3;
inline constexpr int kNumMaterials = 2;
inline constexpr int kNumColors = 8;

// 4 non-snitch shapes x 3 sizes x 2 materials x 8 colors, plus the snitch.
inline constexpr int kNumObjectClasses = 193;
inline constexpr int kSnitchClass = 0;
inline constexpr int kNoneClass = kNumObjectClasses;      // the "no object" class
inline constexpr int kNumClasses = kNumObjectClasses + 1;  // including none

struct WorldObject {
  int id = 0;
  ObjectShape shape = ObjectShape::cube;
  ObjectSize size = ObjectSize::small;
  Material material = Material::rubber;
  Color color = Color::gray;

  bool is_snitch() const { return shape == ObjectShape::snitch; }
  bool is_cone() const { return shape == ObjectShape::cone; }
  int class_id() const;
  // Side length of the square footprint, in plane units.
  double footprint() const;
};

// Inverse of WorldObject::class_id for non-none classes.
WorldObject object_from_class(int class_id, int id = 0);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major cell index of a plane position; throws std::out_of_range
// outside [-3, 3]^2. The far edges belong to the last row/column.
int grid_class(Vec2 pos);
Cell cell_of_class(int grid_class);
Vec2 cell_center(Cell cell);
inline Vec2 class_center(int cls) { return cell_center(cell_of_class(cls)); }
// Inverse of the box synthesis for a plane point: relative image coords.
Vec2 plane_from_image(double u, double v);
Box synthesize_box(Vec2 pos, double footprint);

enum class ActionKind { rotate, pick_place, slide, contain };
std::string to_string(ActionKind kind);
ActionKind action_from_string(const std::string& s);

struct Action {
  int slot = 1;   // 1..T-1; applied between frame slot-1 and frame slot
  int actor = 0;
  ActionKind kind = ActionKind::rotate;
  int target = -1;  // contain: covered object id
  Cell dest{};      // slide / pick_place destination
};

struct FrameState {
  std::vector<Vec2> pos;         // per object
  std::vector<int> container;    // immediate container id, or -1
  std::vector<Box> boxes;        // per object, synthesized from pos
};

struct ChainLink {
  int object = 0;
  int frame = 0;
  friend bool operator==(const ChainLink&, const ChainLink&) = default;
};

struct Episode {
  std::uint64_t seed = 0;
  int frames_count = kDefaultFrames;
  std::vector<WorldObject> objects;
  std::vector<FrameState> frames;
  std::vector<Action> script;
  int snitch = 0;
  int label = 0;
  int last_visible_frame = 0;
  std::vector<ChainLink> chain;

  int T() const { return frames_count; }
  // Top of the containment stack holding `object` at `frame` (itself if free).
  int carrier(int object, int frame) const;
};

// The visibility rule: an object is visible unless its box is completely
// contained by the box of another object in that frame.
bool visible(int object, int frame, const Episode& episode);

struct WorldConfig {
  int n_objects_min = 4;
  int n_objects_max = 6;
  int frames = kDefaultFrames;
  int min_cones = 2;
  double cone_fraction = 0.5;
  double act_prob = 0.35;
  int max_actors_per_slot = 2;
  // Relative action weights, filtered by what each object affords.
  double w_slide = 0.45;
  double w_pick_place = 0.2;
  double w_contain = 0.35;
  double w_rotate = 0.3;
  // Chance that a cone's contain action picks the snitch when eligible.
  double snitch_target_bias = 0.6;
  int max_retries = 32;
};

struct InitialLayout {
  std::vector<WorldObject> objects;
  std::vector<Cell> cells;
};

// Straight-line interpreter for an action script; throws
// std::invalid_argument when the script violates the action semantics.
Episode replay(const InitialLayout& layout, const std::vector<Action>& script, int frames, std::uint64_t seed = 0);

// Random episode. Failed placement retries with seed+1, seed+2, ...; the
// seed actually used is stored on the episode.
Episode simulate(std::uint64_t seed, const WorldConfig& config);

// --- dataset assembly ----------------------------------------------------

enum class Split { train, test };
std::string to_string(Split split);

struct DatasetManifest {
  int frames = kDefaultFrames;
  int per_bin = 0;
  std::vector<Episode> episodes;
  std::vector<Split> splits;      // parallel to episodes
  std::vector<int> bin_counts;    // last_visible_frame histogram

  std::vector<std::size_t> indices(Split split) const;
};

class ShortBinsError : public std::runtime_error {
 public:
  explicit ShortBinsError(std::vector<int> bins);
  const std::vector<int>& bins() const { return bins_; }

 private:
  std::vector<int> bins_;
};

// Keeps the first `per_bin` episodes of every last-visible bin 0..T-1 and
// discards the rest, then splits each bin train/test at `train_fraction`
// after a seeded shuffle. Throws ShortBinsError naming the short bins.
DatasetManifest balance_by_last_visible(const std::vector<Episode>& pool, int per_bin, int frames,
                                        std::uint64_t split_seed, double train_fraction = 0.7);

// Simulates seeds base_seed, base_seed+1, ... until every bin is full.
DatasetManifest generate_balanced(std::uint64_t base_seed, const WorldConfig& config, int per_bin,
                                  double train_fraction = 0.7, std::size_t max_pool = 2'000'000);

}  // namespace mhop::world
