#include "mhop/episode_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace mhop::world {

using nlohmann::json;

namespace {

json cell_json(Cell c) { return json::array({c.row, c.col}); }
Cell cell_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

}  // namespace

std::string episode_to_line(const Episode& ep, Split split) {
  json j;
  j["schema"] = kEpisodeSchema;
  j["seed"] = ep.seed;
  j["split"] = to_string(split);
  j["T"] = ep.T();
  j["snitch"] = ep.snitch;
  j["label"] = ep.label;
  j["last_visible_frame"] = ep.last_visible_frame;
  json objects = json::array();
  for (const auto& o : ep.objects) {
    objects.push_back({{"id", o.id},
                       {"shape", static_cast<int>(o.shape)},
                       {"size", static_cast<int>(o.size)},
                       {"material", static_cast<int>(o.material)},
                       {"color", static_cast<int>(o.color)},
                       {"class", o.class_id()}});
  }
  j["objects"] = std::move(objects);
  json script = json::array();
  for (const auto& a : ep.script) {
    json r = {{"slot", a.slot}, {"actor", a.actor}, {"kind", to_string(a.kind)}};
    if (a.kind == ActionKind::contain) r["target"] = a.target;
    if (a.kind == ActionKind::slide || a.kind == ActionKind::pick_place) r["dest"] = cell_json(a.dest);
    script.push_back(std::move(r));
  }
  j["script"] = std::move(script);
  json frames = json::array();
  for (const auto& f : ep.frames) {
    json pos = json::array();
    json boxes = json::array();
    for (std::size_t i = 0; i < f.pos.size(); ++i) {
      pos.push_back({f.pos[i].x, f.pos[i].y});
      const auto& b = f.boxes[i];
      boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    }
    frames.push_back({{"pos", std::move(pos)}, {"container", f.container}, {"boxes", std::move(boxes)}});
  }
  j["frames"] = std::move(frames);
  json chain = json::array();
  for (const auto& c : ep.chain) chain.push_back({c.object, c.frame});
  j["chain"] = std::move(chain);
  return j.dump();
}

Episode episode_from_line(const std::string& line, Split* split) {
  const json j = json::parse(line);
  if (j.value("schema", "") != kEpisodeSchema) throw std::invalid_argument("episode record: unsupported schema");
  Episode ep;
  ep.seed = j.at("seed").get<std::uint64_t>();
  ep.frames_count = j.at("T").get<int>();
  ep.snitch = j.at("snitch").get<int>();
  ep.label = j.at("label").get<int>();
  ep.last_visible_frame = j.at("last_visible_frame").get<int>();
  for (const auto& o : j.at("objects")) {
    WorldObject w;
    w.id = o.at("id").get<int>();
    w.shape = static_cast<ObjectShape>(o.at("shape").get<int>());
    w.size = static_cast<ObjectSize>(o.at("size").get<int>());
    w.material = static_cast<Material>(o.at("material").get<int>());
    w.color = static_cast<Color>(o.at("color").get<int>());
    if (w.class_id() != o.at("class").get<int>()) throw std::invalid_argument("episode record: class id mismatch");
    ep.objects.push_back(w);
  }
  for (const auto& a : j.at("script")) {
    Action act;
    act.slot = a.at("slot").get<int>();
    act.actor = a.at("actor").get<int>();
    act.kind = action_from_string(a.at("kind").get<std::string>());
    if (a.contains("target")) act.target = a["target"].get<int>();
    if (a.contains("dest")) act.dest = cell_from(a["dest"]);
    ep.script.push_back(act);
  }
  for (const auto& f : j.at("frames")) {
    FrameState s;
    for (const auto& p : f.at("pos")) s.pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    s.container = f.at("container").get<std::vector<int>>();
    for (const auto& b : f.at("boxes")) {
      s.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
    }
    ep.frames.push_back(std::move(s));
  }
  for (const auto& c : j.at("chain")) ep.chain.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  if (static_cast<int>(ep.frames.size()) != ep.frames_count) throw std::invalid_argument("episode record: frame count");
  if (split) *split = split_from(j.value("split", "train"));
  return ep;
}

void save_dataset(const std::filesystem::path& dir, const DatasetManifest& m) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "episodes.jsonl", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / "episodes.jsonl").string());
    for (std::size_t i = 0; i < m.episodes.size(); ++i) os << episode_to_line(m.episodes[i], m.splits[i]) << '\n';
  }
  json j;
  j["schema"] = kManifestSchema;
  j["frames"] = m.frames;
  j["per_bin"] = m.per_bin;
  j["episodes"] = m.episodes.size();
  j["train"] = m.indices(Split::train).size();
  j["test"] = m.indices(Split::test).size();
  j["bin_counts"] = m.bin_counts;
  j["episodes_file"] = "episodes.jsonl";
  j["episodes_fnv1a"] = dataset_hash(dir);
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << '\n';
}

DatasetManifest load_dataset(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw std::runtime_error("missing " + (dir / "manifest.json").string());
  const json j = json::parse(ms);
  if (j.value("schema", "") != kManifestSchema) throw std::invalid_argument("manifest: unsupported schema");
  DatasetManifest m;
  m.frames = j.at("frames").get<int>();
  m.per_bin = j.at("per_bin").get<int>();
  m.bin_counts = j.at("bin_counts").get<std::vector<int>>();
  std::ifstream es(dir / j.value("episodes_file", "episodes.jsonl"));
  if (!es) throw std::runtime_error("missing episodes file in " + dir.string());
  std::string line;
  while (std::getline(es, line)) {
    if (line.empty()) continue;
    Split s{};
    m.episodes.push_back(episode_from_line(line, &s));
    m.splits.push_back(s);
  }
  if (m.episodes.size() != j.at("episodes").get<std::size_t>()) {
    throw std::runtime_error("manifest: episode count does not match episodes file");
  }
  return m;
}

std::string dataset_hash(const std::filesystem::path& dir) {
  std::ifstream is(dir / "episodes.jsonl", std::ios::binary);
  if (!is) throw std::runtime_error("missing episodes file in " + dir.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace mhop::world
