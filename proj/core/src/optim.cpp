#include "mhop/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mhop {

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("ParameterSet: duplicate parameter " + name);
  value.set_requires_grad(true);
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw std::out_of_range("ParameterSet: no parameter named " + name);
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).get(name));
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

void ParameterSet::assign_values(const ParameterSet& other) {
  if (other.names_ != names_) throw std::invalid_argument("ParameterSet::assign_values: layout mismatch");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape() != other.tensors_[i].shape()) {
      throw std::invalid_argument("ParameterSet::assign_values: shape mismatch for " + names_[i]);
    }
    auto dst = tensors_[i].mutable_data();
    auto src = other.tensors_[i].data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void ParameterSet::accumulate_grads(const ParameterSet& other) {
  if (other.names_ != names_) throw std::invalid_argument("ParameterSet::accumulate_grads: layout mismatch");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (!other.tensors_[i].has_grad()) continue;
    auto dst = tensors_[i].mutable_grad();
    auto src = other.tensors_[i].grad();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void ParameterSet::scale_grads(double factor) {
  for (auto& t : tensors_) {
    if (!t.has_grad()) continue;
    for (auto& g : t.mutable_grad()) g *= factor;
  }
}

Adam::Adam(ParameterSet& params, AdamOptions options) : params_(&params), options_(options) {
  for (const auto& t : params.tensors()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  auto& tensors = params_->tensors();
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    auto values = tensors[p].mutable_data();
    const bool has_grad = tensors[p].has_grad();
    std::span<const double> grad = has_grad ? tensors[p].grad() : std::span<const double>{};
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= options_.lr * (mhat / (std::sqrt(vhat) + options_.eps) + options_.weight_decay * values[i]);
    }
  }
}

}  // namespace mhop
