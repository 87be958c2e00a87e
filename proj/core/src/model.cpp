#include "mhop/model.hpp"

#include <stdexcept>

namespace mhop {

ReasoningModel::ReasoningModel(const ModelConfig& config) : config_(config) {
  if (config_.mht.d != config_.d) config_.mht.d = config_.d;
  nn::Initializer init(config_.init_seed);
  const auto d = config_.d;
  obj_in_ = nn::Linear::make(params_, "obj_in", d, d, init);
  frame_in_ = nn::Linear::make(params_, "frame_in", d, d, init);
  time_ = params_.add("time", init.normal({config_.T, d}, 0.1));
  mht_ = std::make_unique<mht::MultiHopTransformer>(params_, "mht", config_.mht, init);
  head_ = nn::Linear::make(params_, "head", d, kGridClasses, init);
}

void ReasoningModel::check(const data::Sample& s) const {
  if (s.N != config_.N || s.T != config_.T || s.d != config_.d) {
    throw std::invalid_argument("ReasoningModel: sample dimensions do not match the model");
  }
}

ReasoningModel::Encoded ReasoningModel::encode(const data::Sample& s) const {
  check(s);
  const auto NT = s.N * s.T;
  std::vector<std::size_t> frame_of(NT);
  for (std::size_t i = 0; i < NT; ++i) frame_of[i] = i % s.T;
  Encoded e;
  const auto objects = Tensor::from({NT, s.d}, s.objects);
  const auto frames = Tensor::from({s.T, s.d}, s.frames);
  e.objects = ops::add(obj_in_(objects), ops::gather_rows(time_, frame_of));
  e.frames = ops::add(frame_in_(frames), time_);
  return e;
}

ReasoningModel::Forward ReasoningModel::forward(const data::Sample& s, const nn::Context& ctx,
                                                const mht::TeacherFrames* teacher) const {
  Forward f;
  f.encoded = encode(s);
  f.mht = mht_->run(f.encoded.objects, f.encoded.frames, s.visible, s.N, s.T, ctx, teacher);
  f.logits = head_(f.mht.e);
  return f;
}

Tensor ReasoningModel::debias_logits(const Encoded& enc, const data::Sample& s, const mht::HopTrace& trace,
                                     const nn::Context& ctx) const {
  const auto NT = s.N * s.T;
  const auto masked_token = trace.hops.back().token;
  std::vector<double> keep(NT * s.d, 1.0);
  for (std::size_t c = 0; c < s.d; ++c) keep[masked_token * s.d + c] = 0.0;
  const auto objects = ops::mul(enc.objects, Tensor::from({NT, s.d}, std::move(keep)));
  const auto out = mht_->run(objects, enc.frames, s.visible, s.N, s.T, ctx, nullptr, &trace);
  return head_(out.e);
}

std::pair<std::vector<double>, mht::HopTrace> ReasoningModel::predict(const data::Sample& s) const {
  NoGradScope no_grad;
  nn::Context ctx;
  auto f = forward(s, ctx);
  return {f.logits.to_vector(), std::move(f.mht.trace)};
}

}  // namespace mhop
