#include "mhop/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mhop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
  }
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.train.adam.lr = 1e-3;
  reconcile(c);
  return c;
}

void reconcile(RunConfig& c) {
  c.model.T = static_cast<std::size_t>(c.world.frames);
  c.model.N = c.data.N;
  c.model.d = c.data.d;
  c.model.mht.d = c.data.d;
  c.data.min_hops = c.model.mht.min_hops;
}

RunConfig parse_run_config(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c = default_run_config();
  check_keys(j, {"seed", "world", "per_bin", "train_fraction", "data", "noise", "model", "train", "baseline_epochs"},
             "top level");
  read(j, "seed", c.seed);
  read(j, "per_bin", c.per_bin);
  read(j, "train_fraction", c.train_fraction);
  read(j, "baseline_epochs", c.baseline_epochs);
  if (j.contains("world")) {
    const auto& w = j["world"];
    check_keys(w, {"n_objects_min", "n_objects_max", "frames", "min_cones", "cone_fraction", "act_prob",
                   "max_actors_per_slot", "w_slide", "w_pick_place", "w_contain", "w_rotate", "snitch_target_bias",
                   "max_retries"},
               "world");
    read(w, "n_objects_min", c.world.n_objects_min);
    read(w, "n_objects_max", c.world.n_objects_max);
    read(w, "frames", c.world.frames);
    read(w, "min_cones", c.world.min_cones);
    read(w, "cone_fraction", c.world.cone_fraction);
    read(w, "act_prob", c.world.act_prob);
    read(w, "max_actors_per_slot", c.world.max_actors_per_slot);
    read(w, "w_slide", c.world.w_slide);
    read(w, "w_pick_place", c.world.w_pick_place);
    read(w, "w_contain", c.world.w_contain);
    read(w, "w_rotate", c.world.w_rotate);
    read(w, "snitch_target_bias", c.world.snitch_target_bias);
    read(w, "max_retries", c.world.max_retries);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, {"N", "d", "tracking", "encoder_seed", "observe_seed", "lambda_c", "lambda_b", "box_l1", "box_giou"},
               "data");
    read(d, "N", c.data.N);
    read(d, "d", c.data.d);
    read(d, "tracking", c.data.tracking);
    read(d, "encoder_seed", c.data.encoder_seed);
    read(d, "observe_seed", c.data.observe_seed);
    read(d, "lambda_c", c.data.weights.lambda_c);
    read(d, "lambda_b", c.data.weights.lambda_b);
    read(d, "box_l1", c.data.weights.l1);
    read(d, "box_giou", c.data.weights.giou);
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    check_keys(n, {"prob_swap", "prob_drop", "embed_sigma", "label_temp", "hallucinate_snitch"}, "noise");
    read(n, "prob_swap", c.data.noise.prob_swap);
    read(n, "prob_drop", c.data.noise.prob_drop);
    read(n, "embed_sigma", c.data.noise.embed_sigma);
    read(n, "label_temp", c.data.noise.label_temp);
    read(n, "hallucinate_snitch", c.data.noise.hallucinate_snitch);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"heads", "ffn_mult", "dropout", "beta", "min_hops", "dynamic_stride", "use_min_hops", "gating",
                   "both_masked", "max_hops", "init_seed"},
               "model");
    read(m, "heads", c.model.mht.heads);
    read(m, "ffn_mult", c.model.mht.ffn_mult);
    read(m, "dropout", c.model.mht.dropout);
    read(m, "beta", c.model.mht.beta);
    read(m, "min_hops", c.model.mht.min_hops);
    read(m, "dynamic_stride", c.model.mht.dynamic_stride);
    read(m, "use_min_hops", c.model.mht.use_min_hops);
    read(m, "gating", c.model.mht.gating);
    read(m, "both_masked", c.model.mht.both_masked);
    read(m, "max_hops", c.model.mht.max_hops);
    read(m, "init_seed", c.model.init_seed);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, {"lr", "weight_decay", "beta1", "beta2", "eps", "batch", "stage1_epochs", "stage2_epochs",
                   "plateau_patience", "lr_decay", "val_fraction", "clip_norm", "seed", "threads", "weights",
                   "switches"},
               "train");
    read(t, "lr", c.train.adam.lr);
    read(t, "weight_decay", c.train.adam.weight_decay);
    read(t, "beta1", c.train.adam.beta1);
    read(t, "beta2", c.train.adam.beta2);
    read(t, "eps", c.train.adam.eps);
    read(t, "batch", c.train.batch);
    read(t, "stage1_epochs", c.train.stage1_epochs);
    read(t, "stage2_epochs", c.train.stage2_epochs);
    read(t, "plateau_patience", c.train.plateau_patience);
    read(t, "lr_decay", c.train.lr_decay);
    read(t, "val_fraction", c.train.val_fraction);
    read(t, "clip_norm", c.train.clip_norm);
    read(t, "seed", c.train.seed);
    read(t, "threads", c.train.threads);
    if (t.contains("weights")) {
      const auto& w = t["weights"];
      check_keys(w, {"grid", "hop1", "hop2", "frame", "debias"}, "train.weights");
      read(w, "grid", c.train.weights.grid);
      read(w, "hop1", c.train.weights.hop1);
      read(w, "hop2", c.train.weights.hop2);
      read(w, "frame", c.train.weights.frame);
      read(w, "debias", c.train.weights.debias);
    }
    if (t.contains("switches")) {
      const auto& s = t["switches"];
      check_keys(s, {"hop1", "hop2", "frame", "teacher_forcing", "debias"}, "train.switches");
      read(s, "hop1", c.train.switches.hop1);
      read(s, "hop2", c.train.switches.hop2);
      read(s, "frame", c.train.switches.frame);
      read(s, "teacher_forcing", c.train.switches.teacher_forcing);
      read(s, "debias", c.train.switches.debias);
    }
  }
  reconcile(c);
  if (c.data.N < static_cast<std::size_t>(c.world.n_objects_max)) {
    throw std::invalid_argument("config: data.N must be at least world.n_objects_max");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed config " + path.string() + ": " + e.what());
  }
}

std::string dump_run_config(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["per_bin"] = c.per_bin;
  j["train_fraction"] = c.train_fraction;
  j["baseline_epochs"] = c.baseline_epochs;
  const auto& w = c.world;
  j["world"] = {{"n_objects_min", w.n_objects_min}, {"n_objects_max", w.n_objects_max}, {"frames", w.frames},
                {"min_cones", w.min_cones}, {"cone_fraction", w.cone_fraction}, {"act_prob", w.act_prob},
                {"max_actors_per_slot", w.max_actors_per_slot}, {"w_slide", w.w_slide},
                {"w_pick_place", w.w_pick_place}, {"w_contain", w.w_contain}, {"w_rotate", w.w_rotate},
                {"snitch_target_bias", w.snitch_target_bias}, {"max_retries", w.max_retries}};
  const auto& d = c.data;
  j["data"] = {{"N", d.N}, {"d", d.d}, {"tracking", d.tracking}, {"encoder_seed", d.encoder_seed},
               {"observe_seed", d.observe_seed}, {"lambda_c", d.weights.lambda_c}, {"lambda_b", d.weights.lambda_b},
               {"box_l1", d.weights.l1}, {"box_giou", d.weights.giou}};
  const auto& n = d.noise;
  j["noise"] = {{"prob_swap", n.prob_swap}, {"prob_drop", n.prob_drop}, {"embed_sigma", n.embed_sigma},
                {"label_temp", n.label_temp}, {"hallucinate_snitch", n.hallucinate_snitch}};
  const auto& m = c.model.mht;
  j["model"] = {{"heads", m.heads}, {"ffn_mult", m.ffn_mult}, {"dropout", m.dropout}, {"beta", m.beta},
                {"min_hops", m.min_hops}, {"dynamic_stride", m.dynamic_stride}, {"use_min_hops", m.use_min_hops},
                {"gating", m.gating}, {"both_masked", m.both_masked}, {"max_hops", m.max_hops},
                {"init_seed", c.model.init_seed}};
  const auto& t = c.train;
  j["train"] = {{"lr", t.adam.lr}, {"weight_decay", t.adam.weight_decay}, {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2}, {"eps", t.adam.eps}, {"batch", t.batch},
                {"stage1_epochs", t.stage1_epochs}, {"stage2_epochs", t.stage2_epochs},
                {"plateau_patience", t.plateau_patience}, {"lr_decay", t.lr_decay},
                {"val_fraction", t.val_fraction}, {"clip_norm", t.clip_norm}, {"seed", t.seed},
                {"threads", t.threads},
                {"weights", {{"grid", t.weights.grid}, {"hop1", t.weights.hop1}, {"hop2", t.weights.hop2},
                             {"frame", t.weights.frame}, {"debias", t.weights.debias}}},
                {"switches", {{"hop1", t.switches.hop1}, {"hop2", t.switches.hop2}, {"frame", t.switches.frame},
                              {"teacher_forcing", t.switches.teacher_forcing}, {"debias", t.switches.debias}}}};
  return j.dump(2);
}

}  // namespace mhop
