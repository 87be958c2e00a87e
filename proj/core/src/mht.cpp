#include "mhop/mht.hpp"

#include <algorithm>
#include <stdexcept>

namespace mhop::mht {

Window mask_window(int t, int h, int T, const MhtConfig& cfg) {
  if (h < 1) throw std::invalid_argument("mask_window: hops count from 1");
  if (h == 1) return {0, T - 1};
  if (t < 0 || t >= T - 1) throw std::invalid_argument("mask_window: previous frame must lie in [0, T-2]");
  const int lo = t + 1;
  int hi = T - 1;
  if (!cfg.dynamic_stride) {
    hi = lo;
  } else if (cfg.use_min_hops) {
    // Leave one frame per mandatory hop still to come.
    hi = std::min(T - 1, std::max(lo, (T - 1) - (cfg.min_hops - h)));
  }
  return {lo, hi};
}

MaskSelection select_unmasked(int t, int h, std::span<const std::uint8_t> V, std::size_t N, std::size_t T,
                              const MhtConfig& cfg) {
  if (V.size() != N * T) throw std::invalid_argument("select_unmasked: visibility map size");
  MaskSelection s;
  s.window = mask_window(t, h, static_cast<int>(T), cfg);
  for (std::size_t k = 0; k < N; ++k) {
    for (int f = s.window.lo; f <= s.window.hi; ++f) {
      const auto i = k * T + static_cast<std::size_t>(f);
      if (V[i]) s.tokens.push_back(i);
    }
  }
  if (s.tokens.empty()) {
    s.fallback = true;
    s.window = {static_cast<int>(T) - 1, static_cast<int>(T) - 1};
    for (std::size_t k = 0; k < N; ++k) {
      if (V[k * T + T - 1]) s.tokens.push_back(k * T + T - 1);
    }
    if (s.tokens.empty()) {
      for (std::size_t k = 0; k < N; ++k) s.tokens.push_back(k * T + T - 1);
    }
  }
  std::sort(s.tokens.begin(), s.tokens.end());
  return s;
}

std::vector<std::size_t> helper_tokens(std::size_t N, std::size_t T, int t, int h) {
  if (h == 1) return {};
  if (t < 0 || static_cast<std::size_t>(t) >= T) throw std::invalid_argument("helper_tokens: frame out of range");
  std::vector<std::size_t> rows(N);
  for (std::size_t k = 0; k < N; ++k) rows[k] = k * T + static_cast<std::size_t>(t);
  return rows;
}

std::size_t most_attended(std::span<const double> A) {
  if (A.empty()) throw std::invalid_argument("most_attended: empty weights");
  const double mx = *std::max_element(A.begin(), A.end());
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i] >= mx - 1e-12) return i;
  }
  return 0;
}

MultiHopTransformer::MultiHopTransformer(ParameterSet& ps, const std::string& name, const MhtConfig& cfg,
                                         nn::Initializer& init)
    : cfg_(cfg) {
  const auto hidden = cfg.d * cfg.ffn_mult;
  tf_ = nn::EncoderDecoder::make(ps, name + ".tf", cfg.d, cfg.heads, hidden, init);
  ts_ = nn::EncoderDecoder::make(ps, name + ".ts", cfg.d, cfg.heads, hidden, init);
  gate_ = nn::Linear::make(ps, name + ".gate", cfg.d, cfg.d, init);
  E0_ = ps.add(name + ".E0", init.normal({1, cfg.d}, 1.0));
  final_norm_ = nn::LayerNorm::make(ps, name + ".final_norm", cfg.d);
}

Tensor MultiHopTransformer::transformer_f(const Tensor& U, const Tensor& H, const nn::Context& ctx) const {
  return tf_.decoder(U, tf_.encode(H, ctx), ctx);
}

Tensor MultiHopTransformer::gate(const Tensor& U_update, const Tensor& U) const {
  return ops::mul(ops::sigmoid(gate_(U_update)), U);
}

SOutput MultiHopTransformer::transformer_s(const Tensor& U_mask, const Tensor& E, const nn::Context& ctx) const {
  const auto memory = ts_.encode(U_mask, ctx);
  SOutput out;
  out.E = ts_.decoder.cross_block(ts_.decoder.self_block(E, ctx), memory, ctx, &out.head_A);
  if (out.head_A.size() == 1) {
    out.A = out.head_A[0];
  } else {
    Tensor acc = out.head_A[0];
    for (std::size_t h = 1; h < out.head_A.size(); ++h) acc = ops::add(acc, out.head_A[h]);
    out.A = ops::scale(acc, 1.0 / static_cast<double>(out.head_A.size()));
  }
  return out;
}

MhtOutput MultiHopTransformer::run(const Tensor& objects, const Tensor& frames, std::span<const std::uint8_t> V,
                                   std::size_t N, std::size_t T, const nn::Context& ctx,
                                   const TeacherFrames* teacher, const HopTrace* replay) const {
  const auto NT = N * T;
  if (objects.rank() != 2 || objects.dim(0) != NT || objects.dim(1) != cfg_.d) {
    throw std::invalid_argument("MultiHopTransformer::run: objects must be [N*T, d]");
  }
  if (frames.rank() != 2 || frames.dim(0) != T) throw std::invalid_argument("MultiHopTransformer::run: frames must be [T, d]");
  if (replay && replay->hops.empty()) throw std::invalid_argument("MultiHopTransformer::run: empty replay schedule");
  const int Ti = static_cast<int>(T);
  const int cap = cfg_.max_hops > 0 ? std::min(cfg_.max_hops, Ti) : Ti;

  std::vector<double> positions(NT);
  for (std::size_t i = 0; i < NT; ++i) positions[i] = static_cast<double>(i % T);

  // The decoder input U is the same every hop, so its self-attention half
  // is computed once unless masking applies to this unit as well.
  Tensor U_self;
  if (!cfg_.both_masked) U_self = tf_.decoder.self_block(objects, ctx);

  MhtOutput out;
  out.trace.N = N;
  out.trace.T = T;
  Tensor E = E0_;
  int t = -1;
  for (int h = 1;; ++h) {
    HopRecord rec;
    rec.hop = h;
    if (replay) {
      const auto& r = replay->hops[static_cast<std::size_t>(h - 1)];
      t = r.t_in;
      rec.window = r.window;
      rec.fallback = r.fallback;
      rec.unmasked = r.unmasked;
    } else {
      auto sel = select_unmasked(t, h, V, N, T, cfg_);
      rec.window = sel.window;
      rec.fallback = sel.fallback;
      rec.unmasked = std::move(sel.tokens);
    }
    rec.t_in = t;
    const auto& R = rec.unmasked;

    const auto helper = h == 1 ? frames : ops::gather_rows(objects, helper_tokens(N, T, t, h));
    const auto memory_f = tf_.encode(helper, ctx);
    const auto U_rows = ops::gather_rows(objects, R);
    const auto dec_in = cfg_.both_masked ? tf_.decoder.self_block(U_rows, ctx) : ops::gather_rows(U_self, R);
    const auto U_update = tf_.decoder.cross_block(dec_in, memory_f, ctx);
    const auto U_mask = cfg_.gating ? gate(U_update, U_rows) : U_update;

    auto s = transformer_s(U_mask, E, ctx);
    E = s.E;
    const auto A = ops::scatter(ops::reshape(s.A, {R.size()}), R, NT);
    const auto soft = ops::softargmax(A, cfg_.beta, positions);

    rec.A = A.to_vector();
    for (const auto& w : s.head_A) {
      std::vector<double> full(NT, 0.0);
      const auto wv = w.data();
      for (std::size_t j = 0; j < R.size(); ++j) full[R[j]] = wv[j];
      rec.head_weights.push_back(std::move(full));
    }
    rec.token = most_attended(rec.A);
    rec.track = rec.token / T;
    rec.frame = static_cast<int>(rec.token % T);
    rec.soft_frame = soft.item();
    int next = rec.frame;
    if (teacher && h == 1 && teacher->hop1 >= 0) next = teacher->hop1;
    if (teacher && h == 2 && teacher->hop2 >= 0) next = teacher->hop2;
    rec.t_out = next;
    t = next;

    out.A.push_back(A);
    out.soft_frame.push_back(soft);
    out.trace.hops.push_back(std::move(rec));

    if (replay) {
      if (static_cast<std::size_t>(h) == replay->hops.size()) break;
    } else if (t >= Ti - 1 || h >= cap) {
      break;
    }
  }
  out.e = final_norm_(E);
  return out;
}

}  // namespace mhop::mht
