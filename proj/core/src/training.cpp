#include "mhop/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "mhop/checkpoint.hpp"
#include "mhop/metrics.hpp"

namespace mhop::train {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool contains(const std::vector<std::size_t>& sorted, std::size_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

struct Totals {
  double loss = 0, grid = 0, hop1 = 0, hop2 = 0, frame = 0, debias = 0;
  long n = 0, correct = 0, hops = 0;
  void add(const LossBreakdown& b, int label) {
    loss += b.total.item();
    grid += b.grid;
    hop1 += b.hop1;
    hop2 += b.hop2;
    frame += b.frame;
    debias += b.debias;
    hops += b.hops;
    correct += metrics::topk(b.logits, label, 1);
    ++n;
  }
  void merge(const Totals& o) {
    loss += o.loss;
    grid += o.grid;
    hop1 += o.hop1;
    hop2 += o.hop2;
    frame += o.frame;
    debias += o.debias;
    n += o.n;
    correct += o.correct;
    hops += o.hops;
  }
};

void clip_gradients(ParameterSet& ps, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (auto& t : ps.tensors()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) ps.scale_grads(max_norm / norm);
}

// Runs forward/backward for a slice of a batch on one model replica.
void run_shard(const ReasoningModel& model, const std::vector<data::Sample>& samples,
               std::span<const std::size_t> idx, const TrainConfig& cfg, bool with_debias, std::uint64_t seed_base,
               Totals& totals, std::string& error) {
  try {
    for (std::size_t i : idx) {
      const auto& s = samples[i];
      std::mt19937_64 rng(mix(seed_base, i));
      nn::Context ctx{true, model.config().mht.dropout, &rng};
      Tape tape;
      TapeScope scope(tape);
      const auto view = cfg.last_frame ? data::last_frame_view(s) : s;
      auto b = sample_loss(model, view, cfg, with_debias, ctx);
      if (!std::isfinite(b.total.item())) {
        throw TrainingDiverged("non-finite loss on sample with episode seed " + std::to_string(s.episode_seed) +
                               " (grid " + std::to_string(b.grid) + ", hop1 " + std::to_string(b.hop1) +
                               ", hop2 " + std::to_string(b.hop2) + ", frame " + std::to_string(b.frame) +
                               ", debias " + std::to_string(b.debias) + ")");
      }
      tape.backward(b.total);
      totals.add(b, s.label);
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
}

}  // namespace

Tensor hop_object_loss(const Tensor& A, std::size_t target) { return ops::nll(A, target); }

Tensor frame_loss(std::span<const Tensor> soft, std::span<const double> targets) {
  if (soft.size() != targets.size() || soft.empty()) throw std::invalid_argument("frame_loss: one target per hop");
  Tensor total;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    const auto term = ops::l1_loss(soft[i], Tensor::scalar(targets[i]));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

Tensor debias_loss(const Tensor& logits) { return ops::neg_entropy(logits); }

LossBreakdown sample_loss(const ReasoningModel& model, const data::Sample& s, const TrainConfig& cfg,
                          bool with_debias, const nn::Context& ctx) {
  const auto& sw = cfg.switches;
  const auto& w = cfg.weights;
  const bool aux = !cfg.grid_only;
  mht::TeacherFrames teacher;
  const bool forcing = aux && ctx.training && sw.teacher_forcing;
  if (forcing) {
    teacher.hop1 = s.hop1_frame;
    teacher.hop2 = s.hop1_frame >= 0 ? s.hop2_frame : -1;
  }
  auto f = model.forward(s, ctx, forcing ? &teacher : nullptr);
  LossBreakdown b;
  b.logits = f.logits.to_vector();
  b.hops = f.mht.trace.hop_count();
  const auto grid = ops::cross_entropy(f.logits, static_cast<std::size_t>(s.label));
  b.grid = grid.item();
  Tensor total = ops::scale(grid, w.grid);
  auto add = [&](const Tensor& term, double weight) { total = ops::add(total, ops::scale(term, weight)); };
  const auto& hops = f.mht.trace.hops;

  if (aux && sw.hop1 && s.hop1_token >= 0 && contains(hops[0].unmasked, static_cast<std::size_t>(s.hop1_token))) {
    const auto l = hop_object_loss(f.mht.A[0], static_cast<std::size_t>(s.hop1_token));
    b.hop1 = l.item();
    b.hop1_used = true;
    add(l, w.hop1);
  }
  if (aux && sw.hop2 && s.hop2_token >= 0 && hops.size() >= 2 &&
      contains(hops[1].unmasked, static_cast<std::size_t>(s.hop2_token))) {
    const auto l = hop_object_loss(f.mht.A[1], static_cast<std::size_t>(s.hop2_token));
    b.hop2 = l.item();
    b.hop2_used = true;
    add(l, w.hop2);
  }
  if (aux && sw.frame && s.hop1_frame >= 0) {
    std::vector<Tensor> soft{f.mht.soft_frame[0]};
    std::vector<double> gt{static_cast<double>(s.hop1_frame)};
    if (s.hop2_frame >= 0 && hops.size() >= 2) {
      soft.push_back(f.mht.soft_frame[1]);
      gt.push_back(static_cast<double>(s.hop2_frame));
    }
    const auto l = frame_loss(soft, gt);
    b.frame = l.item();
    add(l, w.frame);
  }
  if (aux && with_debias && sw.debias) {
    const auto l = debias_loss(model.debias_logits(f.encoded, s, f.mht.trace, ctx));
    b.debias = l.item();
    add(l, w.debias);
  }
  b.total = total;
  return b;
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["stage"] = stage;
  j["lr"] = lr;
  j["loss"] = loss;
  j["grid"] = grid;
  j["hop1"] = hop1;
  j["hop2"] = hop2;
  j["frame"] = frame;
  j["debias"] = debias;
  j["train_top1"] = train_top1;
  j["val_top1"] = val_top1;
  j["val_top5"] = val_top5;
  j["val_l1"] = val_l1;
  j["mean_hops"] = mean_hops;
  return j.dump();
}

TrainResult train(ReasoningModel& model, const std::vector<data::Sample>& samples, const TrainConfig& cfg,
                  const TrainOutputs& outputs) {
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  if (cfg.batch == 0) throw std::invalid_argument("train: batch must be positive");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(mix(cfg.seed, 0x5eed));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_val = samples.size() >= 10 ? static_cast<std::size_t>(std::lround(cfg.val_fraction * samples.size())) : 0;
  std::vector<data::Sample> val;
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  for (std::size_t i = 0; i < n_val; ++i) {
    val.push_back(cfg.last_frame ? data::last_frame_view(samples[order[i]]) : samples[order[i]]);
  }
  std::sort(train_idx.begin(), train_idx.end());

  const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
  std::vector<std::unique_ptr<ReasoningModel>> replicas;
  for (std::size_t r = 1; r < threads; ++r) replicas.push_back(std::make_unique<ReasoningModel>(model.config()));

  Adam opt(model.params(), cfg.adam);
  std::ofstream log;
  if (!outputs.run_dir.empty()) {
    std::filesystem::create_directories(outputs.run_dir / "checkpoints");
    log.open(outputs.run_dir / "metrics.jsonl", std::ios::trunc);
  }

  TrainResult result;
  std::vector<Tensor> best_values;
  int since_best = 0;
  const int total_epochs = cfg.stage1_epochs + cfg.stage2_epochs;
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const int stage = epoch <= cfg.stage1_epochs ? 1 : 2;
    const bool with_debias = stage == 2;
    std::mt19937_64 rng(mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    Totals totals;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch) {
      const auto end = std::min(train_idx.size(), start + cfg.batch);
      const std::span<const std::size_t> batch(train_idx.data() + start, end - start);
      const auto seed_base = mix(mix(cfg.seed, static_cast<std::uint64_t>(epoch)), start);
      model.params().zero_grad();
      if (threads == 1 || batch.size() < 2) {
        std::string err;
        run_shard(model, samples, batch, cfg, with_debias, seed_base, totals, err);
        if (!err.empty()) throw TrainingDiverged(err);
      } else {
        const auto shards = std::min(threads, batch.size());
        std::vector<Totals> part(shards);
        std::vector<std::string> errs(shards);
        std::vector<std::thread> pool;
        const auto per = (batch.size() + shards - 1) / shards;
        for (std::size_t r = 0; r < shards; ++r) {
          const auto lo = std::min(batch.size(), r * per);
          const auto hi = std::min(batch.size(), lo + per);
          ReasoningModel& m = r == 0 ? model : *replicas[r - 1];
          if (r > 0) {
            m.params().assign_values(model.params());
            m.params().zero_grad();
          }
          pool.emplace_back(run_shard, std::cref(m), std::cref(samples), batch.subspan(lo, hi - lo), std::cref(cfg),
                            with_debias, seed_base, std::ref(part[r]), std::ref(errs[r]));
        }
        for (auto& t : pool) t.join();
        for (std::size_t r = 0; r < shards; ++r) {
          if (!errs[r].empty()) throw TrainingDiverged(errs[r]);
          if (r > 0) model.params().accumulate_grads(replicas[r - 1]->params());
          totals.merge(part[r]);
        }
      }
      model.params().scale_grads(1.0 / static_cast<double>(batch.size()));
      clip_gradients(model.params(), cfg.clip_norm);
      opt.step();
    }

    EpochLog e;
    e.epoch = epoch;
    e.stage = stage;
    e.lr = opt.lr();
    const double n = static_cast<double>(std::max<long>(1, totals.n));
    e.loss = totals.loss / n;
    e.grid = totals.grid / n;
    e.hop1 = totals.hop1 / n;
    e.hop2 = totals.hop2 / n;
    e.frame = totals.frame / n;
    e.debias = totals.debias / n;
    e.train_top1 = 100.0 * static_cast<double>(totals.correct) / n;
    e.mean_hops = static_cast<double>(totals.hops) / n;
    if (!val.empty()) {
      const auto report = metrics::summarize(metrics::evaluate(model, val), static_cast<int>(model.config().T));
      e.val_top1 = report.top1;
      e.val_top5 = report.top5;
      e.val_l1 = report.l1;
    } else {
      e.val_top1 = e.train_top1;
    }

    if (e.val_top1 > result.best_val_top1) {
      result.best_val_top1 = e.val_top1;
      result.best_epoch = epoch;
      since_best = 0;
      best_values.clear();
      for (const auto& t : model.params().tensors()) best_values.push_back(t.detach());
      if (!outputs.run_dir.empty()) save_checkpoint(outputs.run_dir / "checkpoints" / "best.ckpt", model.params());
    } else if (++since_best >= cfg.plateau_patience) {
      opt.set_lr(opt.lr() * cfg.lr_decay);
      since_best = 0;
    }
    if (!outputs.run_dir.empty()) {
      save_checkpoint(outputs.run_dir / "checkpoints" / "last.ckpt", model.params());
      log << e.to_json() << '\n' << std::flush;
    }
    if (cfg.verbose) std::cerr << e.to_json() << '\n';
    if (outputs.on_epoch) outputs.on_epoch(e);
    result.history.push_back(e);
  }

  auto& params = model.params().tensors();
  for (std::size_t i = 0; i < params.size() && i < best_values.size(); ++i) {
    const auto src = best_values[i].data();
    auto dst = params[i].mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return result;
}

}  // namespace mhop::train
