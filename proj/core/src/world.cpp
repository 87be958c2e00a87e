#include "mhop/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace mhop::world {

namespace {

constexpr std::array<double, 3> kFootprints = {0.5, 0.7, 0.9};
constexpr double kSnitchFootprint = 0.3;
constexpr double kPlaneSpan = 2.0 * kPlaneHalf;

bool cell_in_grid(Cell c) { return c.row >= 0 && c.row < kGridSide && c.col >= 0 && c.col < kGridSide; }

bool affords_rotate(ObjectShape s) {
  return s == ObjectShape::cube || s == ObjectShape::cylinder || s == ObjectShape::snitch;
}

struct State {
  std::vector<Cell> cell;
  std::vector<int> container;

  bool occupied(Cell c) const {
    for (const auto& x : cell) {
      if (x == c) return true;
    }
    return false;
  }
  bool free(int id) const { return container[static_cast<std::size_t>(id)] < 0; }
  // True when `id` sits (transitively) under `top`.
  bool under(int id, int top) const {
    for (int c = container[static_cast<std::size_t>(id)]; c >= 0; c = container[static_cast<std::size_t>(c)]) {
      if (c == top) return true;
    }
    return false;
  }
  void release_contents(int cone) {
    for (auto& c : container) {
      if (c == cone) c = -1;
    }
  }
};

[[noreturn]] void bad_action(const Action& a, const std::string& why) {
  throw std::invalid_argument("replay: slot " + std::to_string(a.slot) + " actor " + std::to_string(a.actor) + " " +
                              to_string(a.kind) + ": " + why);
}

void apply_action(State& s, const std::vector<WorldObject>& objects, const Action& a) {
  const auto n = static_cast<int>(objects.size());
  if (a.actor < 0 || a.actor >= n) bad_action(a, "actor out of range");
  if (!s.free(a.actor)) bad_action(a, "actor is covered by a cone");
  const auto actor = static_cast<std::size_t>(a.actor);
  switch (a.kind) {
    case ActionKind::rotate:
      if (!affords_rotate(objects[actor].shape)) bad_action(a, "shape does not rotate");
      return;
    case ActionKind::slide: {
      if (!cell_in_grid(a.dest) || s.occupied(a.dest)) bad_action(a, "destination unavailable");
      for (int i = 0; i < n; ++i) {
        if (i == a.actor || s.under(i, a.actor)) s.cell[static_cast<std::size_t>(i)] = a.dest;
      }
      return;
    }
    case ActionKind::pick_place: {
      if (!cell_in_grid(a.dest) || s.occupied(a.dest)) bad_action(a, "destination unavailable");
      s.release_contents(a.actor);
      s.cell[actor] = a.dest;
      return;
    }
    case ActionKind::contain: {
      if (!objects[actor].is_cone()) bad_action(a, "only cones contain");
      if (a.target < 0 || a.target >= n || a.target == a.actor) bad_action(a, "invalid target");
      const auto target = static_cast<std::size_t>(a.target);
      if (!s.free(a.target)) bad_action(a, "target is covered");
      if (!(objects[target].footprint() < objects[actor].footprint())) bad_action(a, "target is not smaller");
      s.release_contents(a.actor);
      s.cell[actor] = s.cell[target];
      s.container[target] = a.actor;
      return;
    }
  }
}

FrameState snapshot(const State& s, const std::vector<WorldObject>& objects) {
  FrameState f;
  f.container = s.container;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    f.pos.push_back(cell_center(s.cell[i]));
    f.boxes.push_back(synthesize_box(f.pos.back(), objects[i].footprint()));
  }
  return f;
}

void finalize(Episode& ep) {
  const int T = ep.T();
  const int s = ep.snitch;
  ep.label = grid_class(ep.frames.back().pos[static_cast<std::size_t>(s)]);
  ep.last_visible_frame = -1;
  for (int t = T - 1; t >= 0; --t) {
    if (visible(s, t, ep)) {
      ep.last_visible_frame = t;
      break;
    }
  }
  if (ep.last_visible_frame < 0) throw std::logic_error("episode: snitch never visible");
  ep.chain.clear();
  const int lv = ep.last_visible_frame;
  ep.chain.push_back({s, lv});
  if (lv == T - 1) return;
  int prev = ep.carrier(s, lv + 1);
  ep.chain.push_back({prev, lv + 1});
  for (int t = lv + 2; t < T; ++t) {
    const int c = ep.carrier(s, t);
    if (c != prev) ep.chain.push_back({c, t});
    prev = c;
  }
  if (ep.chain.back().frame != T - 1) ep.chain.push_back({prev, T - 1});
}

int pick_weighted(std::mt19937_64& rng, const std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total <= 0.0) return -1;
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (r < w[i]) return static_cast<int>(i);
    r -= w[i];
  }
  return static_cast<int>(w.size()) - 1;
}

std::optional<Episode> try_simulate(std::uint64_t seed, const WorldConfig& cfg) {
  std::mt19937_64 rng(seed);
  const int n = std::uniform_int_distribution<int>(cfg.n_objects_min, cfg.n_objects_max)(rng);

  InitialLayout layout;
  std::set<int> classes;
  WorldObject snitch;
  snitch.id = 0;
  snitch.shape = ObjectShape::snitch;
  snitch.size = ObjectSize::small;
  snitch.material = Material::metal;
  snitch.color = Color::yellow;
  layout.objects.push_back(snitch);
  classes.insert(snitch.class_id());
  for (int i = 1; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) return std::nullopt;
      WorldObject o;
      o.id = i;
      const bool cone = i <= cfg.min_cones || std::bernoulli_distribution(cfg.cone_fraction)(rng);
      o.shape = cone ? ObjectShape::cone : static_cast<ObjectShape>(std::uniform_int_distribution<int>(0, 2)(rng));
      o.size = static_cast<ObjectSize>(std::uniform_int_distribution<int>(0, kNumSizes - 1)(rng));
      o.material = static_cast<Material>(std::uniform_int_distribution<int>(0, kNumMaterials - 1)(rng));
      o.color = static_cast<Color>(std::uniform_int_distribution<int>(0, kNumColors - 1)(rng));
      if (classes.insert(o.class_id()).second) {
        layout.objects.push_back(o);
        break;
      }
    }
  }
  std::vector<int> all_cells(kGridCells);
  std::iota(all_cells.begin(), all_cells.end(), 0);
  std::shuffle(all_cells.begin(), all_cells.end(), rng);
  for (int i = 0; i < n; ++i) layout.cells.push_back(cell_of_class(all_cells[static_cast<std::size_t>(i)]));

  State s{layout.cells, std::vector<int>(static_cast<std::size_t>(n), -1)};
  std::vector<Action> script;
  const auto& objects = layout.objects;
  for (int slot = 1; slot < cfg.frames; ++slot) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::set<int> involved;
    std::set<int> reserved;  // destination cells claimed this slot
    int actors = 0;
    for (int id : order) {
      if (actors >= cfg.max_actors_per_slot) break;
      if (!s.free(id) || involved.count(id)) continue;
      if (!std::bernoulli_distribution(cfg.act_prob)(rng)) continue;
      const auto& obj = objects[static_cast<std::size_t>(id)];

      std::vector<int> targets;
      if (obj.is_cone()) {
        for (int j = 0; j < n; ++j) {
          if (j != id && s.free(j) && !involved.count(j) &&
              objects[static_cast<std::size_t>(j)].footprint() < obj.footprint()) {
            targets.push_back(j);
          }
        }
      }
      // slide, pick_place, contain, rotate
      const std::vector<double> weights = {cfg.w_slide, cfg.w_pick_place, targets.empty() ? 0.0 : cfg.w_contain,
                                           affords_rotate(obj.shape) ? cfg.w_rotate : 0.0};
      const int choice = pick_weighted(rng, weights);
      Action a;
      a.slot = slot;
      a.actor = id;
      if (choice == 0 || choice == 1) {
        std::vector<Cell> empty;
        for (int c = 0; c < kGridCells; ++c) {
          const Cell cell = cell_of_class(c);
          if (!s.occupied(cell) && !reserved.count(c)) empty.push_back(cell);
        }
        if (empty.empty()) continue;
        a.kind = choice == 0 ? ActionKind::slide : ActionKind::pick_place;
        a.dest = empty[std::uniform_int_distribution<std::size_t>(0, empty.size() - 1)(rng)];
        reserved.insert(a.dest.row * kGridSide + a.dest.col);
        // Contents released by a pick-place stay put this slot.
        if (a.kind == ActionKind::pick_place) {
          for (int j = 0; j < n; ++j) {
            if (s.container[static_cast<std::size_t>(j)] == id) involved.insert(j);
          }
        }
      } else if (choice == 2) {
        a.kind = ActionKind::contain;
        const bool snitch_ok = std::find(targets.begin(), targets.end(), 0) != targets.end();
        if (snitch_ok && std::bernoulli_distribution(cfg.snitch_target_bias)(rng)) {
          a.target = 0;
        } else {
          a.target = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng)];
        }
        involved.insert(a.target);
        for (int j = 0; j < n; ++j) {
          if (s.container[static_cast<std::size_t>(j)] == id) involved.insert(j);
        }
      } else if (choice == 3) {
        a.kind = ActionKind::rotate;
      } else {
        continue;
      }
      apply_action(s, objects, a);
      involved.insert(id);
      script.push_back(a);
      ++actors;
    }
  }
  return replay(layout, script, cfg.frames, seed);
}

}  // namespace

int WorldObject::class_id() const {
  if (is_snitch()) return kSnitchClass;
  const int shape_idx = static_cast<int>(shape);
  return 1 + ((shape_idx * kNumSizes + static_cast<int>(size)) * kNumMaterials + static_cast<int>(material)) * kNumColors +
         static_cast<int>(color);
}

double WorldObject::footprint() const {
  return is_snitch() ? kSnitchFootprint : kFootprints[static_cast<std::size_t>(size)];
}

WorldObject object_from_class(int class_id, int id) {
  if (class_id < 0 || class_id >= kNumObjectClasses) throw std::out_of_range("object_from_class: bad class");
  WorldObject o;
  o.id = id;
  if (class_id == kSnitchClass) {
    o.shape = ObjectShape::snitch;
    o.size = ObjectSize::small;
    o.material = Material::metal;
    o.color = Color::yellow;
    return o;
  }
  int k = class_id - 1;
  o.color = static_cast<Color>(k % kNumColors);
  k /= kNumColors;
  o.material = static_cast<Material>(k % kNumMaterials);
  k /= kNumMaterials;
  o.size = static_cast<ObjectSize>(k % kNumSizes);
  o.shape = static_cast<ObjectShape>(k / kNumSizes);
  return o;
}

int grid_class(Vec2 pos) {
  if (!(pos.x >= -kPlaneHalf && pos.x <= kPlaneHalf && pos.y >= -kPlaneHalf && pos.y <= kPlaneHalf)) {
    throw std::out_of_range("grid_class: position outside the plane");
  }
  const int col = std::min(kGridSide - 1, static_cast<int>(std::floor(pos.x + kPlaneHalf)));
  const int row = std::min(kGridSide - 1, static_cast<int>(std::floor(pos.y + kPlaneHalf)));
  return row * kGridSide + col;
}

Cell cell_of_class(int cls) {
  if (cls < 0 || cls >= kGridCells) throw std::out_of_range("cell_of_class: class outside 0..35");
  return {cls / kGridSide, cls % kGridSide};
}

Vec2 cell_center(Cell cell) {
  return {static_cast<double>(cell.col) + 0.5 - kPlaneHalf, static_cast<double>(cell.row) + 0.5 - kPlaneHalf};
}

Vec2 plane_from_image(double u, double v) { return {u * kPlaneSpan - kPlaneHalf, v * kPlaneSpan - kPlaneHalf}; }

Box synthesize_box(Vec2 pos, double footprint) {
  const double u = (pos.x + kPlaneHalf) / kPlaneSpan;
  const double v = (pos.y + kPlaneHalf) / kPlaneSpan;
  const double h = 0.5 * footprint / kPlaneSpan;
  return {u - h, v - h, u + h, v + h};
}

std::string to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::rotate: return "rotate";
    case ActionKind::pick_place: return "pick_place";
    case ActionKind::slide: return "slide";
    case ActionKind::contain: return "contain";
  }
  return "?";
}

ActionKind action_from_string(const std::string& s) {
  if (s == "rotate") return ActionKind::rotate;
  if (s == "pick_place") return ActionKind::pick_place;
  if (s == "slide") return ActionKind::slide;
  if (s == "contain") return ActionKind::contain;
  throw std::invalid_argument("unknown action '" + s + "'");
}

int Episode::carrier(int object, int frame) const {
  const auto& cont = frames.at(static_cast<std::size_t>(frame)).container;
  int c = object;
  while (cont.at(static_cast<std::size_t>(c)) >= 0) c = cont[static_cast<std::size_t>(c)];
  return c;
}

bool visible(int object, int frame, const Episode& episode) {
  const auto& f = episode.frames.at(static_cast<std::size_t>(frame));
  const auto& mine = f.boxes.at(static_cast<std::size_t>(object));
  for (std::size_t j = 0; j < f.boxes.size(); ++j) {
    if (static_cast<int>(j) != object && box_contains(f.boxes[j], mine)) return false;
  }
  return true;
}

Episode replay(const InitialLayout& layout, const std::vector<Action>& script, int frames, std::uint64_t seed) {
  const auto n = layout.objects.size();
  if (n < 2 || n > static_cast<std::size_t>(kMaxObjects)) throw std::invalid_argument("replay: need 2..10 objects");
  if (layout.cells.size() != n) throw std::invalid_argument("replay: one cell per object required");
  if (frames < 1) throw std::invalid_argument("replay: need at least one frame");
  int snitches = 0;
  int snitch = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (layout.objects[i].id != static_cast<int>(i)) throw std::invalid_argument("replay: object ids must be 0..n-1");
    if (layout.objects[i].is_snitch()) {
      ++snitches;
      snitch = static_cast<int>(i);
    }
    if (!cell_in_grid(layout.cells[i])) throw std::invalid_argument("replay: initial cell outside the grid");
    for (std::size_t j = 0; j < i; ++j) {
      if (layout.cells[j] == layout.cells[i]) throw std::invalid_argument("replay: two objects share a cell");
    }
  }
  if (snitches != 1) throw std::invalid_argument("replay: exactly one snitch required");

  Episode ep;
  ep.seed = seed;
  ep.frames_count = frames;
  ep.objects = layout.objects;
  ep.snitch = snitch;
  ep.script = script;
  std::stable_sort(ep.script.begin(), ep.script.end(), [](const Action& a, const Action& b) { return a.slot < b.slot; });

  State s{layout.cells, std::vector<int>(n, -1)};
  ep.frames.push_back(snapshot(s, ep.objects));
  std::size_t next = 0;
  for (int slot = 1; slot < frames; ++slot) {
    while (next < ep.script.size() && ep.script[next].slot == slot) apply_action(s, ep.objects, ep.script[next++]);
    ep.frames.push_back(snapshot(s, ep.objects));
  }
  if (next != ep.script.size()) throw std::invalid_argument("replay: action slot outside 1..T-1");
  finalize(ep);
  return ep;
}

Episode simulate(std::uint64_t seed, const WorldConfig& config) {
  if (config.n_objects_min < 2 || config.n_objects_max > kMaxObjects || config.n_objects_min > config.n_objects_max) {
    throw std::invalid_argument("simulate: object count range must lie within 2..10");
  }
  if (config.frames < 1) throw std::invalid_argument("simulate: frames must be positive");
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    if (auto ep = try_simulate(seed + static_cast<std::uint64_t>(attempt), config)) return std::move(*ep);
  }
  throw std::runtime_error("simulate: placement failed after retries");
}

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

namespace {
std::string describe_bins(const std::vector<int>& bins) {
  std::string s = "dataset pool exhausted; short bins:";
  for (int b : bins) s += " " + std::to_string(b);
  return s;
}
}  // namespace

ShortBinsError::ShortBinsError(std::vector<int> bins) : std::runtime_error(describe_bins(bins)), bins_(std::move(bins)) {}

DatasetManifest balance_by_last_visible(const std::vector<Episode>& pool, int per_bin, int frames,
                                        std::uint64_t split_seed, double train_fraction) {
  if (per_bin <= 0) throw std::invalid_argument("balance_by_last_visible: per_bin must be positive");
  std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(frames));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int b = pool[i].last_visible_frame;
    if (pool[i].T() != frames) throw std::invalid_argument("balance_by_last_visible: frame count mismatch in pool");
    auto& bin = bins[static_cast<std::size_t>(b)];
    if (static_cast<int>(bin.size()) < per_bin) bin.push_back(i);
  }
  std::vector<int> short_bins;
  for (int b = 0; b < frames; ++b) {
    if (static_cast<int>(bins[static_cast<std::size_t>(b)].size()) < per_bin) short_bins.push_back(b);
  }
  if (!short_bins.empty()) throw ShortBinsError(std::move(short_bins));

  DatasetManifest m;
  m.frames = frames;
  m.per_bin = per_bin;
  m.bin_counts.assign(static_cast<std::size_t>(frames), per_bin);
  std::mt19937_64 rng(split_seed);
  const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * per_bin));
  for (auto& bin : bins) {
    std::vector<std::size_t> order(bin.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_train(bin.size(), false);
    for (std::size_t k = 0; k < n_train && k < order.size(); ++k) is_train[order[k]] = true;
    for (std::size_t k = 0; k < bin.size(); ++k) {
      m.episodes.push_back(pool[bin[k]]);
      m.splits.push_back(is_train[k] ? Split::train : Split::test);
    }
  }
  return m;
}

DatasetManifest generate_balanced(std::uint64_t base_seed, const WorldConfig& config, int per_bin,
                                  double train_fraction, std::size_t max_pool) {
  std::vector<Episode> kept;
  std::vector<int> counts(static_cast<std::size_t>(config.frames), 0);
  int full = 0;
  std::uint64_t seed = base_seed;
  for (std::size_t drawn = 0; drawn < max_pool && full < config.frames; ++drawn) {
    Episode ep = simulate(seed, config);
    // Retries may have consumed seeds; continue after the one used.
    seed = ep.seed + 1;
    auto& c = counts[static_cast<std::size_t>(ep.last_visible_frame)];
    if (c < per_bin) {
      if (++c == per_bin) ++full;
      kept.push_back(std::move(ep));
    }
  }
  return balance_by_last_visible(kept, per_bin, config.frames, base_seed ^ 0x9e3779b97f4a7c15ULL, train_fraction);
}

}  // namespace mhop::world
