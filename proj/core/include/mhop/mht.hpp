#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mhop/transformer.hpp"

// Iterative two-stage attention over object tracks. Tokens are laid out
// track-major: token i is (track i / T, frame i % T).
namespace mhop::mht {

struct MhtConfig {
  std::size_t d = 32;
  std::size_t heads = 2;
  std::size_t ffn_mult = 4;
  double dropout = 0.1;
  double beta = 1e4;
  int min_hops = 5;
  bool dynamic_stride = true;
  bool use_min_hops = true;
  bool gating = true;
  // Ablation: restrict the first unit's self-attention to unmasked tokens too.
  bool both_masked = false;
  int max_hops = 0;  // 0 means T
};

struct Window {
  int lo = 0;  // inclusive frame bounds
  int hi = 0;
  friend bool operator==(const Window&, const Window&) = default;
};

// Frames whose objects a hop may attend to, given the frame `t` the
// previous hop settled on (ignored for hop 1, which sees every frame).
Window mask_window(int t, int h, int T, const MhtConfig& cfg);

struct MaskSelection {
  Window window;
  std::vector<std::size_t> tokens;  // ascending
  bool fallback = false;
};

// Visible tokens inside the window. An empty window falls back to the
// visible tokens of frame T-1, then to all of frame T-1.
MaskSelection select_unmasked(int t, int h, std::span<const std::uint8_t> V, std::size_t N, std::size_t T,
                              const MhtConfig& cfg);

// Helper rows for hop h: empty for hop 1 (the frame track is used), else
// the N object tokens of frame t.
std::vector<std::size_t> helper_tokens(std::size_t N, std::size_t T, int t, int h);

// Lowest-index token whose weight is within 1e-12 of the maximum.
std::size_t most_attended(std::span<const double> A);

struct HopRecord {
  int hop = 1;
  int t_in = -1;  // frame chosen by the previous hop (after any forcing)
  Window window;
  bool fallback = false;
  std::vector<std::size_t> unmasked;
  std::vector<std::vector<double>> head_weights;  // per head, NT entries
  std::vector<double> A;                          // head average, NT entries
  std::size_t token = 0;
  std::size_t track = 0;
  int frame = 0;      // most-attended frame
  int t_out = 0;      // frame handed to the next hop
  double soft_frame = 0.0;
};

struct HopTrace {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<HopRecord> hops;
  int hop_count() const { return static_cast<int>(hops.size()); }
};

// Frames substituted for the predicted ones after hops 1 and 2; -1 keeps
// the prediction.
struct TeacherFrames {
  int hop1 = -1;
  int hop2 = -1;
};

struct MhtOutput {
  Tensor e;                        // LayerNorm of the final query, [1, d]
  std::vector<Tensor> A;           // per hop, [NT]
  std::vector<Tensor> soft_frame;  // per hop, [1]
  HopTrace trace;
};

struct SOutput {
  Tensor E;                      // [1, d]
  Tensor A;                      // [1, rows]
  std::vector<Tensor> head_A;    // per head [1, rows]
};

class MultiHopTransformer {
 public:
  MultiHopTransformer(ParameterSet& ps, const std::string& name, const MhtConfig& cfg, nn::Initializer& init);

  const MhtConfig& config() const { return cfg_; }

  // objects: [NT, d] time-encoded object tokens; frames: [T, d].
  // `replay` re-runs a recorded hop schedule (helpers and unmasked sets)
  // instead of choosing frames.
  MhtOutput run(const Tensor& objects, const Tensor& frames, std::span<const std::uint8_t> V, std::size_t N,
                std::size_t T, const nn::Context& ctx, const TeacherFrames* teacher = nullptr,
                const HopTrace* replay = nullptr) const;

  // Stand-alone pieces. transformer_f updates every row of U.
  Tensor transformer_f(const Tensor& U, const Tensor& H, const nn::Context& ctx) const;
  Tensor gate(const Tensor& U_update, const Tensor& U) const;
  SOutput transformer_s(const Tensor& U_mask, const Tensor& E, const nn::Context& ctx) const;
  const Tensor& initial_query() const { return E0_; }

 private:
  MhtConfig cfg_;
  nn::EncoderDecoder tf_;
  nn::EncoderDecoder ts_;
  nn::Linear gate_;
  Tensor E0_;
  nn::LayerNorm final_norm_;
};

}  // namespace mhop::mht
