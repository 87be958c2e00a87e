#pragma once

#include <span>
#include <string>
#include <vector>

#include "mhop/model.hpp"

namespace mhop::metrics {

// True when `label` is among the k largest logits; equal logits rank by
// lower class index.
bool topk(std::span<const double> logits, int label, int k);

// Manhattan distance between two cells of the 6x6 grid.
int grid_l1(int a, int b);

// Expected grid L1 between two independent uniform cells.
double random_l1_expectation();

struct EvalRecord {
  std::vector<double> logits;
  int label = 0;
  int bin = 0;             // last visible frame
  int required_hops = 0;   // 0 when no trace applies
  std::vector<int> hop_frames;
};

struct BinStats {
  int count = 0;
  int top1_correct = 0;
  double top1 = 0.0;
};

struct HopBin {
  std::string name;
  int gt = 0;
  int predicted = 0;
  int both = 0;
  double jaccard = 1.0;
};

struct EvalReport {
  std::size_t n = 0;
  double top1 = 0.0;  // percent
  double top5 = 0.0;  // percent
  double l1 = 0.0;
  std::vector<BinStats> per_bin;
  std::vector<HopBin> hop_bins;  // "1", "2", "3", "4", ">=5"
  std::vector<std::vector<int>> attendance;  // [hop][frame]
  double mean_hops = 0.0;
  int hop2_episodes = 0;
  // Fraction of episodes with a second hop whose hop 2 lands on hop 1's frame + 1.
  double hop2_next_frame_rate = 0.0;

  std::string to_json() const;
  std::string per_bin_csv() const;
  std::string attendance_csv() const;
};

EvalReport summarize(const std::vector<EvalRecord>& records, int T);

std::vector<EvalRecord> evaluate(const ReasoningModel& model, const std::vector<data::Sample>& samples,
                                 std::vector<mht::HopTrace>* traces = nullptr);
std::vector<EvalRecord> evaluate_last_frame(const ReasoningModel& model, const std::vector<data::Sample>& samples);
// One-hot logits at the tracking-only prediction.
std::vector<EvalRecord> evaluate_tracking(const std::vector<data::Sample>& samples);

}  // namespace mhop::metrics
