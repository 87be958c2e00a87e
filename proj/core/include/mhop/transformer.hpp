#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mhop/ops.hpp"
#include "mhop/optim.hpp"

// Pre-norm transformer building blocks. Parameters live in a ParameterSet;
// blocks keep handles to them, so replicas are cheap to build.
namespace mhop::nn {

// Xavier-uniform weights, zero biases, unit LayerNorm gains.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Tensor xavier(std::size_t fan_in, std::size_t fan_out);
  Tensor normal(Shape shape, double sigma);
  static Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor::full(std::move(shape), 1.0); }

 private:
  std::mt19937_64 rng_;
};

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
  static Linear make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Initializer& init);
  Tensor operator()(const Tensor& x) const { return ops::linear(x, w, b); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  static LayerNorm make(ParameterSet& ps, const std::string& name, std::size_t d);
  Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, gain, bias); }
};

// Per-call switches shared by every block.
struct Context {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor drop(const Tensor& x) const;
};

struct AttentionResult {
  Tensor out;                  // [m, d]
  std::vector<Tensor> weights;  // per head [m, n]
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  std::size_t heads = 2;
  static MultiHeadAttention make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                                 Initializer& init);
  AttentionResult operator()(const Tensor& query, const Tensor& memory) const;
};

struct FeedForward {
  Linear in, out;
  static FeedForward make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t hidden,
                          Initializer& init);
  Tensor operator()(const Tensor& x, const Context& ctx) const;
};

// x + SA(LN x), then + FFN(LN x)
struct EncoderLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;
  static EncoderLayer make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                           std::size_t hidden, Initializer& init);
  Tensor operator()(const Tensor& x, const Context& ctx) const;
};

// Split in two so the self-attention half can be cached when the decoder
// input does not change between calls.
struct DecoderLayer {
  LayerNorm ln1, ln2, ln3;
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ffn;
  static DecoderLayer make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                           std::size_t hidden, Initializer& init);
  Tensor self_block(const Tensor& x, const Context& ctx) const;
  // Cross-attention and feed-forward; `weights` receives per-head weights.
  Tensor cross_block(const Tensor& x, const Tensor& memory, const Context& ctx,
                     std::vector<Tensor>* weights = nullptr) const;
  Tensor operator()(const Tensor& x, const Tensor& memory, const Context& ctx) const {
    return cross_block(self_block(x, ctx), memory, ctx);
  }
};

// One encoder layer plus final LayerNorm on the memory, one decoder layer.
struct EncoderDecoder {
  EncoderLayer encoder;
  LayerNorm memory_norm;
  DecoderLayer decoder;
  static EncoderDecoder make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                             std::size_t hidden, Initializer& init);
  Tensor encode(const Tensor& source, const Context& ctx) const { return memory_norm(encoder(source, ctx)); }
};

}  // namespace mhop::nn
