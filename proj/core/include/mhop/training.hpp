#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mhop/model.hpp"

namespace mhop::train {

struct LossWeights {
  double grid = 1.0;
  double hop1 = 1.0;
  double hop2 = 1.0;
  double frame = 0.1;
  double debias = 0.1;
};

// Training-method switches; model-side ones (stride, gating, ...) live in
// the model config.
struct TrainSwitches {
  bool hop1 = true;
  bool hop2 = true;
  bool frame = true;
  bool teacher_forcing = true;
  bool debias = true;
};

struct TrainConfig {
  AdamOptions adam;
  std::size_t batch = 16;
  int stage1_epochs = 10;  // auxiliary losses and teacher forcing
  int stage2_epochs = 5;   // adds the debias loss
  int plateau_patience = 10;
  double lr_decay = 0.1;
  double val_fraction = 0.1;
  double clip_norm = 5.0;  // global gradient norm, 0 disables
  std::uint64_t seed = 1;
  LossWeights weights;
  TrainSwitches switches;
  bool grid_only = false;   // plain classifier training (last-frame probe)
  bool last_frame = false;  // feed only the final frame
  std::size_t threads = 1;
  bool verbose = false;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// -log A[target]: attention weights act as the token likelihood.
Tensor hop_object_loss(const Tensor& A, std::size_t target);
// Sum of |soft frame - target frame| over the given hops.
Tensor frame_loss(std::span<const Tensor> soft_frames, std::span<const double> targets);
// sum_k g_k log g_k over the grid classes of the masked rerun.
Tensor debias_loss(const Tensor& logits);

struct LossBreakdown {
  Tensor total;
  double grid = 0.0;
  double hop1 = 0.0;
  double hop2 = 0.0;
  double frame = 0.0;
  double debias = 0.0;
  bool hop1_used = false;
  bool hop2_used = false;
  int hops = 0;
  std::vector<double> logits;
};

LossBreakdown sample_loss(const ReasoningModel& model, const data::Sample& sample, const TrainConfig& config,
                          bool with_debias, const nn::Context& ctx);

struct EpochLog {
  int epoch = 0;
  int stage = 1;
  double lr = 0.0;
  double loss = 0.0;
  double grid = 0.0;
  double hop1 = 0.0;
  double hop2 = 0.0;
  double frame = 0.0;
  double debias = 0.0;
  double train_top1 = 0.0;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
  double val_l1 = 0.0;
  double mean_hops = 0.0;
  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_val_top1 = -1.0;
};

struct TrainOutputs {
  std::filesystem::path run_dir;  // empty: nothing written
  std::function<void(const EpochLog&)> on_epoch;
};

// Mini-batch AdamW with a validation carve-out from `samples`. The model
// ends up holding the best-validation parameters.
TrainResult train(ReasoningModel& model, const std::vector<data::Sample>& samples, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

}  // namespace mhop::train
