#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mhop/dataset.hpp"
#include "mhop/mht.hpp"

namespace mhop {

struct ModelConfig {
  std::size_t N = 6;
  std::size_t T = 13;
  std::size_t d = 32;
  mht::MhtConfig mht;
  std::uint64_t init_seed = 1;
};

inline constexpr std::size_t kGridClasses = 36;

// Input projections and learned time encodings, the multi-hop core, and a
// linear grid head on the final query.
class ReasoningModel {
 public:
  explicit ReasoningModel(const ModelConfig& config);
  ReasoningModel(const ReasoningModel&) = delete;
  ReasoningModel& operator=(const ReasoningModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const mht::MultiHopTransformer& core() const { return *mht_; }

  struct Encoded {
    Tensor objects;  // [N*T, d]
    Tensor frames;   // [T, d]
  };
  struct Forward {
    Tensor logits;  // [1, 36]
    mht::MhtOutput mht;
    Encoded encoded;
  };

  Encoded encode(const data::Sample& sample) const;
  Forward forward(const data::Sample& sample, const nn::Context& ctx,
                  const mht::TeacherFrames* teacher = nullptr) const;
  // Re-runs the hop schedule of `trace` with the last hop's most-attended
  // object token set to zeros.
  Tensor debias_logits(const Encoded& encoded, const data::Sample& sample, const mht::HopTrace& trace,
                       const nn::Context& ctx) const;

  // Evaluation-mode logits and trace, no tape.
  std::pair<std::vector<double>, mht::HopTrace> predict(const data::Sample& sample) const;

 private:
  void check(const data::Sample& sample) const;

  ModelConfig config_;
  ParameterSet params_;
  nn::Linear obj_in_;
  nn::Linear frame_in_;
  Tensor time_;
  std::unique_ptr<mht::MultiHopTransformer> mht_;
  nn::Linear head_;
};

}  // namespace mhop
