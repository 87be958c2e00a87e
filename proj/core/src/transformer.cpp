#include "mhop/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace mhop::nn {

Tensor Initializer::xavier(std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = u(rng_);
  return Tensor::from({fan_in, fan_out}, std::move(v));
}

Tensor Initializer::normal(Shape shape, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = g(rng_);
  return Tensor::from(std::move(shape), std::move(v));
}

Linear Linear::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Initializer& init) {
  return {ps.add(name + ".w", init.xavier(in, out)), ps.add(name + ".b", Initializer::zeros({out}))};
}

LayerNorm LayerNorm::make(ParameterSet& ps, const std::string& name, std::size_t d) {
  return {ps.add(name + ".gain", Initializer::ones({d})), ps.add(name + ".bias", Initializer::zeros({d}))};
}

Tensor Context::drop(const Tensor& x) const {
  if (!training || dropout <= 0.0) return x;
  if (!rng) throw std::logic_error("nn::Context: training dropout needs an rng");
  return ops::dropout(x, dropout, *rng, true);
}

MultiHeadAttention MultiHeadAttention::make(ParameterSet& ps, const std::string& name, std::size_t d,
                                            std::size_t heads, Initializer& init) {
  if (heads == 0 || d % heads != 0) throw std::invalid_argument("MultiHeadAttention: d must divide into heads");
  MultiHeadAttention m;
  m.q = Linear::make(ps, name + ".q", d, d, init);
  m.k = Linear::make(ps, name + ".k", d, d, init);
  m.v = Linear::make(ps, name + ".v", d, d, init);
  m.o = Linear::make(ps, name + ".o", d, d, init);
  m.heads = heads;
  return m;
}

AttentionResult MultiHeadAttention::operator()(const Tensor& query, const Tensor& memory) const {
  const auto d = query.dim(1);
  const auto dh = d / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto Q = q(query);
  const auto K = k(memory);
  const auto V = v(memory);
  AttentionResult r;
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const auto qh = heads == 1 ? Q : ops::slice_cols(Q, h * dh, dh);
    const auto kh = heads == 1 ? K : ops::slice_cols(K, h * dh, dh);
    const auto vh = heads == 1 ? V : ops::slice_cols(V, h * dh, dh);
    auto w = ops::softmax(ops::scale(ops::matmul(qh, ops::transpose(kh)), s));
    outs.push_back(ops::matmul(w, vh));
    r.weights.push_back(std::move(w));
  }
  r.out = o(heads == 1 ? outs[0] : ops::concat_cols(outs));
  return r;
}

FeedForward FeedForward::make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t hidden,
                              Initializer& init) {
  return {Linear::make(ps, name + ".in", d, hidden, init), Linear::make(ps, name + ".out", hidden, d, init)};
}

Tensor FeedForward::operator()(const Tensor& x, const Context& ctx) const {
  return out(ctx.drop(ops::relu(in(x))));
}

EncoderLayer EncoderLayer::make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                                std::size_t hidden, Initializer& init) {
  EncoderLayer e;
  e.ln1 = LayerNorm::make(ps, name + ".ln1", d);
  e.attn = MultiHeadAttention::make(ps, name + ".attn", d, heads, init);
  e.ln2 = LayerNorm::make(ps, name + ".ln2", d);
  e.ffn = FeedForward::make(ps, name + ".ffn", d, hidden, init);
  return e;
}

Tensor EncoderLayer::operator()(const Tensor& x, const Context& ctx) const {
  const auto n1 = ln1(x);
  auto y = ops::add(x, ctx.drop(attn(n1, n1).out));
  return ops::add(y, ctx.drop(ffn(ln2(y), ctx)));
}

DecoderLayer DecoderLayer::make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                                std::size_t hidden, Initializer& init) {
  DecoderLayer l;
  l.ln1 = LayerNorm::make(ps, name + ".ln1", d);
  l.self_attn = MultiHeadAttention::make(ps, name + ".self", d, heads, init);
  l.ln2 = LayerNorm::make(ps, name + ".ln2", d);
  l.cross_attn = MultiHeadAttention::make(ps, name + ".cross", d, heads, init);
  l.ln3 = LayerNorm::make(ps, name + ".ln3", d);
  l.ffn = FeedForward::make(ps, name + ".ffn", d, hidden, init);
  return l;
}

Tensor DecoderLayer::self_block(const Tensor& x, const Context& ctx) const {
  const auto n1 = ln1(x);
  return ops::add(x, ctx.drop(self_attn(n1, n1).out));
}

Tensor DecoderLayer::cross_block(const Tensor& x, const Tensor& memory, const Context& ctx,
                                 std::vector<Tensor>* weights) const {
  auto ca = cross_attn(ln2(x), memory);
  if (weights) *weights = std::move(ca.weights);
  auto y = ops::add(x, ctx.drop(ca.out));
  return ops::add(y, ctx.drop(ffn(ln3(y), ctx)));
}

EncoderDecoder EncoderDecoder::make(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads,
                                    std::size_t hidden, Initializer& init) {
  EncoderDecoder u;
  u.encoder = EncoderLayer::make(ps, name + ".enc", d, heads, hidden, init);
  u.memory_norm = LayerNorm::make(ps, name + ".enc_norm", d);
  u.decoder = DecoderLayer::make(ps, name + ".dec", d, heads, hidden, init);
  return u;
}

}  // namespace mhop::nn
