// Command-line front end: dataset generation, training, evaluation, traces
// and diagnostics. Every command writes into a run directory.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mhop/checkpoint.hpp"
#include "mhop/config.hpp"
#include "mhop/episode_io.hpp"
#include "mhop/metrics.hpp"

namespace fs = std::filesystem;
using namespace mhop;
using nlohmann::ordered_json;

namespace {

fs::path run_root() {
  const char* env = std::getenv("MHOP_RUN_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path resolve(const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : run_root() / path;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

struct Common {
  std::string config;
  std::string data = "data";
  std::string run = "run";
};

RunConfig load_config(const Common& c) {
  return c.config.empty() ? default_run_config() : load_run_config(c.config);
}

std::vector<data::Sample> split_samples(const RunConfig& cfg, const fs::path& data_dir, world::Split split) {
  const auto manifest = world::load_dataset(data_dir);
  if (manifest.frames != cfg.world.frames) throw std::runtime_error("dataset frame count differs from config");
  return data::make_samples(manifest, split, cfg.data);
}

void snapshot(const RunConfig& cfg, const fs::path& run_dir, const fs::path& data_dir) {
  write_file(run_dir / "config.json", dump_run_config(cfg) + "\n");
  write_file(run_dir / "dataset.txt", data_dir.string() + " " + world::dataset_hash(data_dir) + "\n");
}

void load_best(ReasoningModel& model, const fs::path& run_dir) {
  const auto best = run_dir / "checkpoints" / "best.ckpt";
  if (!fs::exists(best)) throw std::runtime_error("no checkpoint at " + best.string() + "; run `train` first");
  load_checkpoint(best, model.params());
}

ordered_json trace_json(const mht::HopTrace& trace) {
  ordered_json hops = ordered_json::array();
  for (const auto& h : trace.hops) {
    hops.push_back({{"hop", h.hop},
                    {"t_in", h.t_in},
                    {"window", {h.window.lo, h.window.hi}},
                    {"fallback", h.fallback},
                    {"unmasked", h.unmasked},
                    {"token", h.token},
                    {"track", h.track},
                    {"frame", h.frame},
                    {"soft_frame", h.soft_frame},
                    {"A", h.A},
                    {"heads", h.head_weights}});
  }
  return {{"N", trace.N}, {"T", trace.T}, {"hops", std::move(hops)}};
}

int cmd_gen(const Common& c, int per_bin_override) {
  auto cfg = load_config(c);
  const int per_bin = per_bin_override > 0 ? per_bin_override : cfg.per_bin;
  const auto dir = resolve(c.data);
  const auto m = world::generate_balanced(cfg.seed, cfg.world, per_bin, cfg.train_fraction);
  world::save_dataset(dir, m);
  std::cout << "wrote " << m.episodes.size() << " episodes (" << m.indices(world::Split::train).size() << " train, "
            << m.indices(world::Split::test).size() << " test) to " << dir << "\n";
  return 0;
}

int cmd_train(const Common& c, bool last_frame) {
  auto cfg = load_config(c);
  const auto data_dir = resolve(c.data);
  const auto run_dir = resolve(c.run);
  const auto samples = split_samples(cfg, data_dir, world::Split::train);
  snapshot(cfg, run_dir, data_dir);
  auto train_cfg = cfg.train;
  auto model_cfg = cfg.model;
  if (last_frame) {
    train_cfg.grid_only = true;
    train_cfg.last_frame = true;
    train_cfg.stage1_epochs = cfg.baseline_epochs;
    train_cfg.stage2_epochs = 0;
    model_cfg.T = 1;
  }
  ReasoningModel model(model_cfg);
  train::TrainOutputs out;
  out.run_dir = run_dir;
  out.on_epoch = [](const train::EpochLog& e) { std::cout << e.to_json() << "\n" << std::flush; };
  const auto r = train::train(model, samples, train_cfg, out);
  std::cout << "best epoch " << r.best_epoch << ", validation top-1 " << r.best_val_top1 << "%\n";
  return 0;
}

int cmd_eval(const Common& c) {
  auto cfg = load_config(c);
  const auto run_dir = resolve(c.run);
  const auto test = split_samples(cfg, resolve(c.data), world::Split::test);
  ReasoningModel model(cfg.model);
  load_best(model, run_dir);
  const auto report = metrics::summarize(metrics::evaluate(model, test), cfg.world.frames);
  write_file(run_dir / "reports" / "eval.json", report.to_json() + "\n");
  write_file(run_dir / "reports" / "per_bin.csv", report.per_bin_csv());
  write_file(run_dir / "reports" / "attendance.csv", report.attendance_csv());
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_trace(const Common& c, std::size_t index, const std::string& split_name) {
  auto cfg = load_config(c);
  const auto run_dir = resolve(c.run);
  const auto split = split_name == "train" ? world::Split::train : world::Split::test;
  const auto manifest = world::load_dataset(resolve(c.data));
  const auto idx = manifest.indices(split);
  if (index >= idx.size()) throw std::out_of_range("episode index beyond split size " + std::to_string(idx.size()));
  const auto& ep = manifest.episodes[idx[index]];
  const perception::AttributeEncoder encoder(cfg.data.d, cfg.data.encoder_seed);
  const auto sample = data::make_sample(ep, encoder, cfg.data);
  ReasoningModel model(cfg.model);
  load_best(model, run_dir);
  const auto [logits, trace] = model.predict(sample);
  ordered_json chain = ordered_json::array();
  for (const auto& l : ep.chain) chain.push_back({l.object, l.frame});
  ordered_json j;
  j["episode_seed"] = ep.seed;
  j["label"] = ep.label;
  j["prediction"] = std::max_element(logits.begin(), logits.end()) - logits.begin();
  j["last_visible_frame"] = ep.last_visible_frame;
  j["chain"] = std::move(chain);
  j["trace"] = trace_json(trace);
  const auto text = j.dump(2);
  write_file(run_dir / "traces" / (split_name + "_" + std::to_string(index) + ".json"), text + "\n");
  std::cout << text << "\n";
  return 0;
}

int cmd_diagnose_hops(const Common& c) {
  auto cfg = load_config(c);
  const auto run_dir = resolve(c.run);
  const auto test = split_samples(cfg, resolve(c.data), world::Split::test);
  ReasoningModel model(cfg.model);
  load_best(model, run_dir);
  const auto report = metrics::summarize(metrics::evaluate(model, test), cfg.world.frames);
  std::ostringstream os;
  os << "hops,gt,predicted,both,jaccard\n";
  for (const auto& b : report.hop_bins) {
    os << b.name << ',' << b.gt << ',' << b.predicted << ',' << b.both << ',' << b.jaccard << '\n';
  }
  write_file(run_dir / "reports" / "hop_bins.csv", os.str());
  write_file(run_dir / "reports" / "attendance.csv", report.attendance_csv());
  std::cout << os.str() << "\n" << report.attendance_csv() << "hop2 on hop1 frame + 1: "
            << report.hop2_next_frame_rate << " of " << report.hop2_episodes << " episodes\n";
  return 0;
}

int cmd_diagnose_tracks(const Common& c) {
  auto cfg = load_config(c);
  const auto manifest = world::load_dataset(resolve(c.data));
  const perception::AttributeEncoder encoder(cfg.data.d, cfg.data.encoder_seed);
  std::vector<double> purity_sum(static_cast<std::size_t>(cfg.world.frames), 0.0);
  std::vector<int> count(static_cast<std::size_t>(cfg.world.frames), 0);
  int lv_ok = 0, carrier_ok = 0, carrier_n = 0;
  for (const auto& ep : manifest.episodes) {
    const auto ts = data::episode_tracks(ep, encoder, cfg.data);
    const auto b = static_cast<std::size_t>(ep.last_visible_frame);
    purity_sum[b] += tracker::purity(ts);
    ++count[b];
    const auto V = tracker::visibility_map(ts);
    const auto lv = tracker::last_visible_snitch(ts, V);
    if (lv && static_cast<int>(lv->frame) == ep.last_visible_frame) ++lv_ok;
    if (lv && ep.chain.size() >= 2) {
      ++carrier_n;
      if (const auto cont = tracker::immediate_container(ts, *lv)) {
        carrier_ok += ts.at(cont->track, cont->frame).source == ep.chain[1].object;
      }
    }
  }
  std::ostringstream os;
  os << "last_visible,episodes,mean_purity\n";
  for (std::size_t b = 0; b < count.size(); ++b) {
    os << b << ',' << count[b] << ',' << (count[b] ? purity_sum[b] / count[b] : 0.0) << '\n';
  }
  const auto n = manifest.episodes.size();
  os << "last_visible_snitch agreement," << lv_ok << '/' << n << "\n";
  os << "immediate_container agreement," << carrier_ok << '/' << carrier_n << "\n";
  write_file(resolve(c.run) / "reports" / "tracks.csv", os.str());
  std::cout << os.str();
  return 0;
}

int cmd_baseline(const Common& c, const std::string& kind) {
  auto cfg = load_config(c);
  const auto run_dir = resolve(c.run);
  const auto test = split_samples(cfg, resolve(c.data), world::Split::test);
  metrics::EvalReport report;
  if (kind == "tracking") {
    report = metrics::summarize(metrics::evaluate_tracking(test), cfg.world.frames);
  } else if (kind == "last-frame") {
    auto model_cfg = cfg.model;
    model_cfg.T = 1;
    ReasoningModel model(model_cfg);
    load_best(model, run_dir);
    report = metrics::summarize(metrics::evaluate_last_frame(model, test), cfg.world.frames);
  } else {
    throw std::invalid_argument("unknown baseline '" + kind + "' (tracking, last-frame)");
  }
  write_file(run_dir / "reports" / ("baseline_" + kind + ".json"), report.to_json() + "\n");
  std::cout << report.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-hop object permanence reasoning"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_run) {
    sub->add_option("-c,--config", common.config, "run config (JSON); defaults when omitted")->check(CLI::ExistingFile);
    sub->add_option("-d,--data", common.data, "dataset directory, relative to $MHOP_RUN_ROOT")->capture_default_str();
    if (needs_run) sub->add_option("-r,--run", common.run, "run directory, relative to $MHOP_RUN_ROOT")->capture_default_str();
  };

  int per_bin = 0;
  auto* gen = app.add_subcommand("gen-data", "generate a balanced episode dataset");
  add_common(gen, false);
  gen->add_option("--per-bin", per_bin, "episodes per last-visible bin (overrides config)");

  bool last_frame = false;
  auto* tr = app.add_subcommand("train", "train the model (or the last-frame probe)");
  add_common(tr, true);
  tr->add_flag("--last-frame", last_frame, "train the last-frame-only baseline instead");

  auto* ev = app.add_subcommand("eval", "evaluate the best checkpoint on the test split");
  add_common(ev, true);

  std::size_t episode = 0;
  std::string split = "test";
  auto* trc = app.add_subcommand("trace", "export the hop trace of one episode");
  add_common(trc, true);
  trc->add_option("-e,--episode", episode, "index within the split")->capture_default_str();
  trc->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();

  auto* dh = app.add_subcommand("diagnose-hops", "hop-count Jaccard and hop/frame attendance");
  add_common(dh, true);

  auto* dt = app.add_subcommand("diagnose-tracks", "track purity and heuristic agreement");
  add_common(dt, true);

  std::string kind = "tracking";
  auto* bl = app.add_subcommand("baseline", "evaluate a baseline on the test split");
  add_common(bl, true);
  bl->add_option("-k,--kind", kind, "tracking or last-frame")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(common, per_bin);
    if (*tr) return cmd_train(common, last_frame);
    if (*ev) return cmd_eval(common);
    if (*trc) return cmd_trace(common, episode, split);
    if (*dh) return cmd_diagnose_hops(common);
    if (*dt) return cmd_diagnose_tracks(common);
    if (*bl) return cmd_baseline(common, kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
