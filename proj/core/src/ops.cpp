#include "mhop/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mhop::ops {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using Backward = std::function<void(Node&)>;

[[noreturn]] void reject(const std::string& what) { throw std::invalid_argument(what); }

void require_rank2(const Tensor& t, const char* op) {
  if (!t.defined() || t.rank() != 2) reject(std::string(op) + ": expected a rank-2 tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    reject(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs, Backward backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  Tape* tape = Tape::active();
  bool needs = false;
  if (tape) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> values, std::span<const Tensor> inputs, Backward backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  Tape* tape = Tape::active();
  bool needs = false;
  if (tape) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of parent `i`, or nullptr when it does not want one.
double* parent_grad(Node& n, std::size_t i) {
  auto& p = *n.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

const double* parent_value(Node& n, std::size_t i) { return n.parents[i]->value.data(); }

template <class F, class D>
Tensor unary(const Tensor& x, F forward, D derivative) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [derivative](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    const double* xv = parent_value(n, 0);
    for (std::size_t i = 0; i < n.value.size(); ++i) g[i] += n.grad[i] * derivative(xv[i], n.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) reject("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& node) {
    MapC dc(node.grad.data(), m, n);
    if (double* ga = parent_grad(node, 0)) Map(ga, m, k).noalias() += dc * MapC(parent_value(node, 1), k, n).transpose();
    if (double* gb = parent_grad(node, 1)) Map(gb, k, n).noalias() += MapC(parent_value(node, 0), m, k).transpose() * dc;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  Map(out.data(), n, m) = MapC(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& node) {
    if (double* g = parent_grad(node, 0)) Map(g, m, n) += MapC(node.grad.data(), n, m).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(n, p)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
    if (double* g = parent_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    const double* av = parent_value(n, 0);
    const double* bv = parent_value(n, 1);
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (double* g = parent_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * s;
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  const auto m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) reject("add_bias: bias length " + std::to_string(bias.size()) + " != " + std::to_string(n));
  const auto xv = x.data(), bv = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = xv[r * n + c] + bv[c];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [m, n](Node& node) {
    if (double* g = parent_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    }
    if (double* g = parent_grad(node, 1)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) g[c] += node.grad[r * n + c];
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_bias(matmul(x, w), b); }

Tensor sum(const Tensor& x) {
  const auto xv = x.data();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_result({1}, {s}, {x}, [](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      const auto len = n.parents[0]->value.size();
      for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) reject("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor softmax(const Tensor& x, std::span<const std::uint8_t> allowed) {
  if (!x.defined() || x.rank() == 0) reject("softmax: undefined input");
  const auto n = x.shape().back();
  if (n == 0) reject("softmax: empty axis");
  if (!allowed.empty() && allowed.size() != n) reject("softmax: mask length does not match axis");
  const auto rows = x.size() / n;
  const auto xv = x.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (allowed.empty() || allowed[c]) mx = std::max(mx, in[c]);
    }
    if (!std::isfinite(mx)) reject("softmax: no admissible entries in row");
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (allowed.empty() || allowed[c]) {
        o[c] = std::exp(in[c] - mx);
        z += o[c];
      }
    }
    for (std::size_t c = 0; c < n; ++c) o[c] /= z;
  }
  return make_result(x.shape(), std::move(out), {x}, [n, rows](Node& node) {
    double* g = parent_grad(node, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = node.value.data() + r * n;
      const double* gy = node.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += y[c] * gy[c];
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (gy[c] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  if (!x.defined() || x.rank() == 0) reject("log_softmax: undefined input");
  const auto n = x.shape().back();
  if (n == 0) reject("log_softmax: empty axis");
  const auto rows = x.size() / n;
  const auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(in[c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = in[c] - lz;
  }
  return make_result(x.shape(), std::move(out), {x}, [n, rows](Node& node) {
    double* g = parent_grad(node, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = node.value.data() + r * n;
      const double* gy = node.grad.data() + r * n;
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += gy[c];
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += gy[c] - std::exp(y[c]) * s;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (!x.defined() || x.rank() == 0) reject("layer_norm: undefined input");
  const auto d = x.shape().back();
  if (d < 2) reject("layer_norm: last axis must have at least 2 entries");
  if (gain.size() != d || bias.size() != d) reject("layer_norm: gain/bias length mismatch");
  const auto rows = x.size() / d;
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  std::vector<double> out(x.size());
  // Normalized values and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += in[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (in[c] - mu) * is;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [d, rows, xhat, inv_std](Node& node) {
    const double* gv = parent_value(node, 1);
    double* gx = parent_grad(node, 0);
    double* gg = parent_grad(node, 1);
    double* gb = parent_grad(node, 2);
    const auto dd = static_cast<double>(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gy = node.grad.data() + r * d;
      const double* h = xhat->data() + r * d;
      if (gg || gb) {
        for (std::size_t c = 0; c < d; ++c) {
          if (gg) gg[c] += gy[c] * h[c];
          if (gb) gb[c] += gy[c];
        }
      }
      if (!gx) continue;
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double gh = gy[c] * gv[c];
        s1 += gh;
        s2 += gh * h[c];
      }
      const double is = (*inv_std)[r];
      for (std::size_t c = 0; c < d; ++c) {
        const double gh = gy[c] * gv[c];
        gx[r * d + c] += is * (gh - s1 / dd - h[c] * s2 / dd);
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) reject("dropout: rate must be < 1");
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  for (auto& m : *mask) m = coin(rng) ? 1.0 / keep : 0.0;
  const auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  return make_result(x.shape(), std::move(out), {x}, [mask](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * (*mask)[i];
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank2(table, "gather_rows");
  const auto rows = table.dim(0), d = table.dim(1);
  const auto tv = table.data();
  std::vector<double> out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) reject("gather_rows: index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(tv.data() + indices[i] * d, d, out.data() + i * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({indices.size(), d}, std::move(out), {table}, [idx = std::move(idx), d](Node& n) {
    double* g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < d; ++c) g[idx[i] * d + c] += n.grad[i * d + c];
    }
  });
}

Tensor scatter(const Tensor& x, std::span<const std::size_t> indices, std::size_t size) {
  if (x.size() != indices.size()) reject("scatter: index count does not match input");
  const auto xv = x.data();
  std::vector<double> out(size, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size) reject("scatter: index out of range");
    out[indices[i]] = xv[i];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({size}, std::move(out), {x}, [idx = std::move(idx)](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < idx.size(); ++i) g[i] += n.grad[idx[i]];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) reject("concat_rows: no inputs");
  const auto d = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != d) reject("concat_rows: column count mismatch");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result_n({rows, d}, std::move(out), parts, [](Node& n) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < n.parents.size(); ++p) {
      const auto len = n.parents[p]->value.size();
      if (double* g = parent_grad(n, p)) {
        for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) reject("concat_cols: no inputs");
  const auto m = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != m) reject("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    cols += p.dim(1);
  }
  std::vector<double> out(m * cols);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].data();
    for (std::size_t r = 0; r < m; ++r) std::copy_n(pv.data() + r * widths[p], widths[p], out.data() + r * cols + off);
    off += widths[p];
  }
  return make_result_n({m, cols}, std::move(out), parts, [m, cols, widths](Node& n) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < n.parents.size(); ++p) {
      if (double* g = parent_grad(n, p)) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < widths[p]; ++c) g[r * widths[p] + c] += n.grad[r * cols + off + c];
        }
      }
      off += widths[p];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_cols");
  const auto m = x.dim(0), n = x.dim(1);
  if (start + count > n) reject("slice_cols: range out of bounds");
  const auto xv = x.data();
  std::vector<double> out(m * count);
  for (std::size_t r = 0; r < m; ++r) std::copy_n(xv.data() + r * n + start, count, out.data() + r * count);
  return make_result({m, count}, std::move(out), {x}, [m, n, start, count](Node& node) {
    if (double* g = parent_grad(node, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < count; ++c) g[r * n + start + c] += node.grad[r * count + c];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) reject("reshape: element count mismatch");
  return make_result(std::move(shape), x.to_vector(), {x}, [](Node& n) {
    if (double* g = parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor pick(const Tensor& x, std::size_t index) {
  if (index >= x.size()) reject("pick: index out of range");
  return make_result({1}, {x.data()[index]}, {x}, [index](Node& n) {
    if (double* g = parent_grad(n, 0)) g[index] += n.grad[0];
  });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  if (target >= logits.size()) {
    reject("cross_entropy: target " + std::to_string(target) + " out of range for " +
           std::to_string(logits.size()) + " classes");
  }
  return scale(pick(log_softmax(reshape(logits, {1, logits.size()})), target), -1.0);
}

Tensor nll(const Tensor& probs, std::size_t target) {
  if (target >= probs.size()) reject("nll: target out of range");
  return scale(log(pick(probs, target)), -1.0);
}

Tensor l1_loss(const Tensor& a, const Tensor& b) { return sum(abs(sub(a, b))); }

Tensor softargmax(const Tensor& x, double beta, std::span<const double> positions) {
  if (x.size() == 0) reject("softargmax: empty input");
  if (!positions.empty() && positions.size() != x.size()) reject("softargmax: positions length mismatch");
  std::vector<double> pos(x.size());
  if (positions.empty()) {
    std::iota(pos.begin(), pos.end(), 0.0);
  } else {
    std::copy(positions.begin(), positions.end(), pos.begin());
  }
  const auto w = softmax(scale(reshape(x, {1, x.size()}), beta));
  return sum(mul(w, Tensor::from({1, x.size()}, std::move(pos))));
}

Tensor neg_entropy(const Tensor& logits) {
  const auto flat = reshape(logits, {1, logits.size()});
  return sum(mul(softmax(flat), log_softmax(flat)));
}

}  // namespace mhop::ops
