#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsaug/tensor.hpp"

namespace tsaug {

// Ordered name -> tensor collection. Model parameters, buffers and
// checkpoints all use it.
class NamedTensors {
 public:
  void add(std::string name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  std::size_t element_count() const;

  friend bool operator==(const NamedTensors&, const NamedTensors&) = default;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled: p <- p - lr * wd * p before the Adam delta
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;

  static AdamState for_params(const NamedTensors& params, AdamConfig config);
};

// One Adam update with bias correction. Returns the new parameter snapshot;
// `grads` must match `params` tensor by tensor. Throws std::domain_error on a
// non-finite gradient (state is left untouched in that case).
NamedTensors adam_step(const NamedTensors& params, const NamedTensors& grads, AdamState& state);

}  // namespace tsaug
