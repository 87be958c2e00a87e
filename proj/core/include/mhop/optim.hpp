#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mhop/tensor.hpp"

namespace mhop {

/// Named, ordered collection of trainable leaves.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  // Copies values (not grads) from a set with identical names and shapes.
  void assign_values(const ParameterSet& other);
  // Adds other's gradients into ours (shard reduction).
  void accumulate_grads(const ParameterSet& other);
  void scale_grads(double factor);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// Adam with decoupled weight decay. Moment buffers start at zero.
class Adam {
 public:
  Adam(ParameterSet& params, AdamOptions options);

  void step();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long steps() const { return steps_; }

 private:
  ParameterSet* params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long steps_ = 0;
};

}  // namespace mhop
