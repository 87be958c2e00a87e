// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion; the
// arguments pick criteria by number (all of them when none are given).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "grad_check.hpp"
#include "mhop/config.hpp"
#include "mhop/hungarian.hpp"
#include "mhop/metrics.hpp"

using namespace mhop;
using mhop::testing::max_grad_error;
using mhop::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: autodiff -----------------------------------------------------------

Outcome autodiff() {
  const double start = cpu_seconds();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  std::string worst_name;
  auto record = [&](const std::string& name, double err) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  };
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t m = 1 + trial % 3, k = 2 + trial % 3, n = 1 + (trial + 1) % 3;
    auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), c = random_tensor({m, k}, rng);
    auto bias = random_tensor({k}, rng), gain = random_tensor({k}, rng, 0.5, 1.5);
    auto pos = random_tensor({m, k}, rng, 0.2, 2.0);
    const auto out_bias = random_tensor({n}, rng).detach();
    const auto weights = random_tensor({m, k}, rng).detach();
    const auto weigh = [&](const Tensor& t) { return ops::sum(ops::mul(t, weights)); };
    std::vector<std::uint8_t> allowed(k, 1);
    allowed[0] = 0;
    const std::vector<std::size_t> rows{m - 1, 0};
    std::vector<std::size_t> slots(m);
    for (std::size_t i = 0; i < m; ++i) slots[i] = 2 * i + 1;
    record("matmul", max_grad_error([&] { return ops::sum(ops::matmul(a, b)); }, {a, b}));
    record("transpose", max_grad_error([&] { return weigh(ops::transpose(ops::transpose(a))); }, {a}));
    record("add", max_grad_error([&] { return weigh(ops::add(a, c)); }, {a, c}));
    record("sub", max_grad_error([&] { return weigh(ops::sub(a, c)); }, {a, c}));
    record("mul", max_grad_error([&] { return weigh(ops::mul(a, c)); }, {a, c}));
    record("scale", max_grad_error([&] { return weigh(ops::scale(a, 0.7)); }, {a}));
    record("add_bias", max_grad_error([&] { return weigh(ops::add_bias(a, bias)); }, {a, bias}));
    record("linear", max_grad_error([&] { return ops::sum(ops::linear(a, b, out_bias)); }, {a, b}));
    record("sigmoid", max_grad_error([&] { return weigh(ops::sigmoid(a)); }, {a}));
    record("relu", max_grad_error([&] { return weigh(ops::relu(a)); }, {a}));
    record("log", max_grad_error([&] { return weigh(ops::log(pos)); }, {pos}));
    record("abs", max_grad_error([&] { return weigh(ops::abs(a)); }, {a}));
    record("softmax", max_grad_error([&] { return weigh(ops::softmax(a)); }, {a}));
    record("masked softmax", max_grad_error([&] { return weigh(ops::softmax(a, allowed)); }, {a}));
    record("log_softmax", max_grad_error([&] { return weigh(ops::log_softmax(a)); }, {a}));
    record("layer_norm", max_grad_error([&] { return weigh(ops::layer_norm(a, gain, bias)); }, {a, gain, bias}));
    record("dropout(eval)", max_grad_error([&] { return weigh(ops::dropout(a, 0.3, rng, false)); }, {a}));
    record("gather_rows", max_grad_error([&] { return ops::sum(ops::mul(ops::gather_rows(a, rows), ops::gather_rows(c, rows))); }, {a, c}));
    record("scatter", max_grad_error([&] {
             const auto s = ops::scatter(ops::reshape(ops::slice_cols(a, 0, 1), {m}), slots, 2 * m + 1);
             return ops::sum(ops::mul(s, s));
           }, {a}));
    record("concat", max_grad_error([&] {
             const std::vector<Tensor> p{a, c};
             return ops::sum(ops::mul(ops::concat_rows(p), ops::concat_rows(p)));
           }, {a, c}));
    record("concat_cols", max_grad_error([&] { const std::vector<Tensor> p{a, c}; return weigh(ops::slice_cols(ops::concat_cols(p), 1, k)); }, {a, c}));
    record("pick", max_grad_error([&] { return ops::pick(ops::mul(a, c), 0); }, {a, c}));
    record("mean", max_grad_error([&] { return ops::mean(ops::mul(a, a)); }, {a}));
    record("cross_entropy", max_grad_error([&] { return ops::cross_entropy(ops::reshape(a, {m * k}), 0); }, {a}));
    record("nll", max_grad_error([&] { return ops::nll(ops::reshape(pos, {m * k}), m * k - 1); }, {pos}));
    record("l1_loss", max_grad_error([&] { return ops::l1_loss(a, c); }, {a, c}));
    record("softargmax", max_grad_error([&] { return ops::softargmax(a, 3.0); }, {a}));
    record("neg_entropy", max_grad_error([&] { return ops::neg_entropy(a); }, {a}));
  }

  // The full model on a T=3, N=2, d=8 toy, every loss term, every parameter.
  ModelConfig mc;
  mc.N = 2;
  mc.T = 3;
  mc.d = 8;
  mc.mht.dropout = 0.0;
  mc.mht.beta = 20.0;
  mc.mht.min_hops = 3;
  ReasoningModel model(mc);
  data::Sample s;
  s.N = 2;
  s.T = 3;
  s.d = 8;
  std::normal_distribution<double> g(0.0, 1.0);
  s.objects.resize(2 * 3 * 8);
  s.frames.resize(3 * 8);
  for (auto& x : s.objects) x = g(rng);
  for (auto& x : s.frames) x = g(rng);
  s.visible.assign(6, 1);
  s.label = 5;
  s.hop1_token = 0;
  s.hop1_frame = 0;
  s.hop2_token = 4;
  s.hop2_frame = 1;
  train::TrainConfig tc;
  tc.weights = {1.0, 1.0, 1.0, 1.0, 1.0};
  const nn::Context ctx;
  const auto trace = model.forward(s, ctx).mht.trace;
  // Pin the hop schedule so the discrete frame choices cannot flip while
  // a parameter is nudged.
  const mht::TeacherFrames pinned{trace.hops[0].frame, trace.hop_count() > 1 ? trace.hops[1].frame : -1};
  auto& ps = model.params().tensors();
  const std::vector<Tensor> params(ps.begin(), ps.end());
  const auto full_loss = [&] {
        const auto f = model.forward(s, ctx, &pinned);
        Tensor l = ops::cross_entropy(f.logits, 5);
        l = ops::add(l, train::hop_object_loss(f.mht.A[0], 0));
        if (f.mht.A.size() > 1) l = ops::add(l, train::hop_object_loss(f.mht.A[1], f.mht.trace.hops[1].unmasked.back()));
        const std::vector<Tensor> soft{f.mht.soft_frame[0]};
        l = ops::add(l, train::frame_loss(soft, std::vector<double>{0.3}));
        return ops::add(l, train::debias_loss(model.debias_logits(f.encoded, s, f.mht.trace, ctx)));
      };
  const double full = max_grad_error(full_loss, params);
  double grad_sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) grad_sq += g * g;
  }
  record("full model", full);
  const double secs = cpu_seconds() - start;
  return {worst <= 1e-3 && grad_sq > 0.0 && secs < 60.0,
          fmt("worst relative error %.2e (%s); full model %.2e over %zu tensors, |grad| %.3g; %.1f CPU s", worst,
              worst_name.c_str(), full, params.size(), std::sqrt(grad_sq), secs)};
}

// --- 2: Hungarian ----------------------------------------------------------

Outcome hungarian() {
  const double start = cpu_seconds();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(2, 6), level(-3, 3);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng);
    std::vector<double> cost(static_cast<std::size_t>(n * n));
    for (auto& c : cost) c = trial % 4 == 0 ? level(rng) : val(rng);
    if (solve_assignment(cost, n).cost != brute_force_assignment(cost, n).cost) ++mismatches;
  }
  const double secs = cpu_seconds() - start;
  return {mismatches == 0 && secs < 10.0, fmt("%d/200 cost mismatches against brute force, %.2f s", mismatches, secs)};
}

// --- 3: masking and termination -------------------------------------------

Outcome masking() {
  const auto cfg = default_run_config();
  const perception::AttributeEncoder enc(cfg.data.d, cfg.data.encoder_seed);
  std::vector<std::unique_ptr<ReasoningModel>> models;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto mc = cfg.model;
    mc.init_seed = seed;
    models.push_back(std::make_unique<ReasoningModel>(mc));
  }
  long masked_nonzero = 0, not_increasing = 0, too_long = 0, too_short = 0, unterminated = 0;
  const int T = cfg.world.frames;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto ep = world::simulate(10'000 + seed, cfg.world);
    const auto s = data::make_sample(ep, enc, cfg.data);
    const auto& model = *models[seed % models.size()];
    const auto trace = model.predict(s).second;
    const auto& hops = trace.hops;
    if (static_cast<int>(hops.size()) > T) ++too_long;
    if (hops.back().frame != T - 1) ++unterminated;
    for (std::size_t h = 0; h < hops.size(); ++h) {
      std::vector<std::uint8_t> open(s.N * s.T, 0);
      for (auto i : hops[h].unmasked) open[i] = 1;
      for (std::size_t i = 0; i < open.size(); ++i) masked_nonzero += !open[i] && hops[h].A[i] != 0.0;
      if (h > 0 && hops[h].frame <= hops[h - 1].frame) ++not_increasing;
    }
    const int feasible = std::min(cfg.model.mht.min_hops, 1 + (T - 1 - hops[0].frame));
    if (trace.hop_count() < feasible) ++too_short;
  }
  const long violations = masked_nonzero + not_increasing + too_long + too_short + unterminated;
  return {violations == 0, fmt("1000 episodes: masked nonzero %ld, non-increasing %ld, over T %ld, under min-hops %ld, "
                               "unterminated %ld",
                               masked_nonzero, not_increasing, too_long, too_short, unterminated)};
}

// --- 4: worked window example ----------------------------------------------

Outcome window_example() {
  // Frames counted from 1 in the example; the library counts from 0.
  mht::MhtConfig cfg;
  const auto w = mht::mask_window(3 - 1, 2, 13, cfg);
  const int lo = w.lo + 1, hi = w.hi + 1;
  return {lo == 4 && hi == 10, fmt("T=13, hop 1 on frame 3 -> hop 2 window frames %d..%d (1-based)", lo, hi)};
}

// --- 5: random-baseline calibration ---------------------------------------

Outcome calibration() {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> cls(0, 35);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<metrics::EvalRecord> recs(20000);
  for (auto& r : recs) {
    r.logits.resize(36);
    for (auto& x : r.logits) x = g(rng);
    r.label = cls(rng);
  }
  const auto rep = metrics::summarize(recs, 13);
  const double expect_l1 = metrics::random_l1_expectation();
  const bool ok = std::fabs(rep.top1 - 2.78) <= 0.5 && std::fabs(rep.top5 - 13.9) <= 1.0 &&
                  std::fabs(rep.l1 - 3.89) <= 0.05 && std::fabs(expect_l1 - 3.89) <= 0.05;
  return {ok, fmt("%zu samples: top-1 %.2f%%, top-5 %.2f%%, L1 %.3f (closed form %.4f)", rep.n, rep.top1, rep.top5,
                  rep.l1, expect_l1)};
}

// --- 6: heuristic oracles ---------------------------------------------------

Outcome heuristics() {
  const auto cfg = default_run_config();
  const perception::AttributeEncoder enc(cfg.data.d, cfg.data.encoder_seed);
  int lv_hits = 0, carried = 0, carrier_hits = 0, missing = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto ep = world::simulate(20'000 + seed, cfg.world);
    const auto ts = data::episode_tracks(ep, enc, cfg.data);
    const auto lv = tracker::last_visible_snitch(ts, tracker::visibility_map(ts));
    if (!lv) {
      ++missing;
      continue;
    }
    lv_hits += static_cast<int>(lv->frame) == ep.last_visible_frame;
    if (ep.chain.size() < 2) continue;
    ++carried;
    const auto ic = tracker::immediate_container(ts, *lv);
    carrier_hits += ic && ts.at(ic->track, ic->frame).source == ep.chain[1].object;
  }
  const double rate = carried ? 100.0 * carrier_hits / carried : 100.0;
  const bool ok = lv_hits == 1000 && rate >= 95.0;
  return {ok, fmt("last visible snitch %d/1000 (%d undetected); immediate container %d/%d = %.1f%% (alert below 95%%)",
                  lv_hits, missing, carrier_hits, carried, rate)};
}

// --- 7 and 9: end to end ----------------------------------------------------

// Desk-scale run settings. 500 episodes per bin gives 4550 train / 1950
// test episodes; the epoch budget keeps the whole run inside 45 CPU minutes.
constexpr int kPerBin = 500;
constexpr int kStage1Epochs = 32;
constexpr int kStage2Epochs = 5;

struct EndToEnd {
  RunConfig cfg;
  std::vector<data::Sample> train, test;
  std::unique_ptr<ReasoningModel> model;
  metrics::EvalReport full, tracking, last_frame;
  double cpu = 0.0;
};

EndToEnd& end_to_end() {
  static std::unique_ptr<EndToEnd> run;
  if (run) return *run;
  run = std::make_unique<EndToEnd>();
  auto& r = *run;
  const double start = cpu_seconds();
  r.cfg = default_run_config();
  r.cfg.per_bin = kPerBin;
  r.cfg.train.stage1_epochs = kStage1Epochs;
  r.cfg.train.stage2_epochs = kStage2Epochs;
  reconcile(r.cfg);
  const int T = r.cfg.world.frames;
  const auto manifest = world::generate_balanced(r.cfg.seed, r.cfg.world, r.cfg.per_bin, r.cfg.train_fraction);
  r.train = data::make_samples(manifest, world::Split::train, r.cfg.data);
  r.test = data::make_samples(manifest, world::Split::test, r.cfg.data);
  std::cerr << "end-to-end: " << r.train.size() << " train / " << r.test.size() << " test episodes\n";

  r.tracking = metrics::summarize(metrics::evaluate_tracking(r.test), T);

  auto probe_cfg = r.cfg.model;
  probe_cfg.T = 1;
  ReasoningModel probe(probe_cfg);
  auto probe_train = r.cfg.train;
  probe_train.grid_only = true;
  probe_train.last_frame = true;
  probe_train.stage1_epochs = r.cfg.baseline_epochs;
  probe_train.stage2_epochs = 0;
  train::train(probe, r.train, probe_train);
  r.last_frame = metrics::summarize(metrics::evaluate_last_frame(probe, r.test), T);
  std::cerr << "end-to-end: last-frame probe top-1 " << r.last_frame.top1 << "%\n";

  r.model = std::make_unique<ReasoningModel>(r.cfg.model);
  train::TrainOutputs out;
  out.on_epoch = [](const train::EpochLog& e) { std::cerr << "  " << e.to_json() << "\n"; };
  train::train(*r.model, r.train, r.cfg.train, out);
  r.full = metrics::summarize(metrics::evaluate(*r.model, r.test), T);
  r.cpu = cpu_seconds() - start;
  return r;
}

Outcome desk_scale() {
  const auto& r = end_to_end();
  const double margin_tr = r.full.top1 - r.tracking.top1;
  const double margin_lf = r.full.top1 - r.last_frame.top1;
  const bool sizes = r.train.size() >= 2000 && r.test.size() >= 600;
  const bool ok = sizes && r.full.top1 >= 60.0 && margin_tr >= 10.0 && margin_lf >= 10.0 && r.cpu <= 45 * 60.0;
  return {ok, fmt("%zu/%zu episodes: model top-1 %.2f%%, tracking %.2f%% (+%.2f), last-frame %.2f%% (+%.2f), "
                  "%.1f CPU min",
                  r.train.size(), r.test.size(), r.full.top1, r.tracking.top1, margin_tr, r.last_frame.top1, margin_lf,
                  r.cpu / 60.0)};
}

Outcome hop_diagnostics() {
  const auto& r = end_to_end();
  std::ostringstream bins;
  double worst = 1.0;
  for (const auto& b : r.full.hop_bins) {
    bins << " " << b.name << ":" << fmt("%.3f", b.jaccard) << "(" << b.gt << "/" << b.predicted << ")";
    worst = std::min(worst, b.jaccard);
  }
  const bool ok = worst >= 0.8 && r.full.hop2_next_frame_rate > 0.5;
  return {ok, fmt("Jaccard per bin (gt/pred):%s; hop 2 on hop-1 frame + 1 in %.1f%% of %d episodes",
                  bins.str().c_str(), 100.0 * r.full.hop2_next_frame_rate, r.full.hop2_episodes)};
}

// --- 8: ablation direction --------------------------------------------------

Outcome ablation() {
  auto base_cfg = default_run_config();
  base_cfg.per_bin = 100;
  base_cfg.train.stage1_epochs = 14;
  base_cfg.train.stage2_epochs = 4;
  reconcile(base_cfg);
  const int T = base_cfg.world.frames;
  const auto manifest = world::generate_balanced(base_cfg.seed + 100, base_cfg.world, base_cfg.per_bin, 0.7);
  const auto train_set = data::make_samples(manifest, world::Split::train, base_cfg.data);
  const auto test_set = data::make_samples(manifest, world::Split::test, base_cfg.data);

  auto run = [&](const std::string& which, std::uint64_t seed) {
    auto cfg = base_cfg;
    cfg.model.init_seed = seed;
    cfg.train.seed = seed;
    if (which == "base") {
      cfg.train.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
      cfg.train.switches = {false, false, false, false, false};
      cfg.model.mht.dynamic_stride = false;
    } else if (which == "no-debias") {
      cfg.train.switches.debias = false;
    }
    ReasoningModel model(cfg.model);
    train::train(model, train_set, cfg.train);
    const double top1 = metrics::summarize(metrics::evaluate(model, test_set), T).top1;
    std::cerr << "ablation: " << which << " seed " << seed << " top-1 " << top1 << "%\n";
    return top1;
  };
  std::map<std::string, std::vector<double>> scores;
  for (const auto* which : {"full", "base", "no-debias"}) {
    for (std::uint64_t seed : {11u, 12u, 13u}) scores[which].push_back(run(which, seed));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
  };
  const double full = median(scores["full"]), base = median(scores["base"]), nodeb = median(scores["no-debias"]);
  return {full >= base && nodeb <= full,
          fmt("median top-1 over 3 seeds: full %.2f%%, base %.2f%%, without debias %.2f%%", full, base, nodeb)};
}

// --- 10: determinism --------------------------------------------------------

Outcome determinism() {
  auto once = [] {
    auto cfg = default_run_config();
    cfg.per_bin = 6;
    cfg.train.stage1_epochs = 2;
    cfg.train.stage2_epochs = 1;
    reconcile(cfg);
    const auto manifest = world::generate_balanced(cfg.seed, cfg.world, cfg.per_bin, cfg.train_fraction);
    const auto train_set = data::make_samples(manifest, world::Split::train, cfg.data);
    const auto test_set = data::make_samples(manifest, world::Split::test, cfg.data);
    ReasoningModel model(cfg.model);
    const auto history = train::train(model, train_set, cfg.train).history;
    std::string log;
    for (const auto& e : history) log += e.to_json() + "\n";
    return log + metrics::summarize(metrics::evaluate(model, test_set), cfg.world.frames).to_json();
  };
  const auto a = once();
  const auto b = once();
  return {a == b, fmt("two identical runs: reports of %zu and %zu bytes, %s", a.size(), b.size(),
                      a == b ? "byte-identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"autodiff finite differences", autodiff}},
      {2, {"Hungarian exactness", hungarian}},
      {3, {"masking and termination invariants", masking}},
      {4, {"min-hop window worked example", window_example}},
      {5, {"random-baseline calibration", calibration}},
      {6, {"heuristic oracle agreement", heuristics}},
      {7, {"desk-scale end-to-end accuracy", desk_scale}},
      {8, {"ablation direction", ablation}},
      {9, {"hop diagnostics", hop_diagnostics}},
      {10, {"determinism", determinism}},
  };
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) pick.push_back(std::stoi(argv[i]));
  if (pick.empty()) {
    for (const auto& [k, v] : criteria) pick.push_back(k);
  }
  int failed = 0;
  for (int k : pick) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "criterion " << k << " (" << it->second.first << "): " << o.detail
              << fmt(" [%.1f s]", wall) << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
