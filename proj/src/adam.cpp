#include "tsaug/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tsaug {

std::size_t NamedTensors::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return names_.size();
}

void NamedTensors::add(std::string name, Tensor t) {
  if (name.empty() || name.find_first_of("\t\n") != std::string::npos)
    throw std::invalid_argument("tensor name must be non-empty and free of tabs/newlines");
  if (contains(name)) throw std::invalid_argument("duplicate tensor name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

bool NamedTensors::contains(const std::string& name) const { return index_of(name) < names_.size(); }

const Tensor& NamedTensors::at(const std::string& name) const {
  const std::size_t i = index_of(name);
  if (i == names_.size()) throw std::out_of_range("no tensor named " + name);
  return tensors_[i];
}

Tensor& NamedTensors::at(const std::string& name) {
  const std::size_t i = index_of(name);
  if (i == names_.size()) throw std::out_of_range("no tensor named " + name);
  return tensors_[i];
}

std::size_t NamedTensors::element_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

AdamState AdamState::for_params(const NamedTensors& params, AdamConfig config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be positive");
  if (config.weight_decay < 0.0) throw std::invalid_argument("Adam weight decay must be non-negative");
  AdamState s;
  s.config = config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.first_moment.emplace_back(params.tensor(i).size(), 0.0);
    s.second_moment.emplace_back(params.tensor(i).size(), 0.0);
  }
  return s;
}

NamedTensors adam_step(const NamedTensors& params, const NamedTensors& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.tensor(i).size() != params.tensor(i).size() ||
        state.first_moment[i].size() != params.tensor(i).size())
      throw std::invalid_argument("adam_step: length mismatch for " + params.name(i));
    if (!grads.tensor(i).all_finite())
      throw std::domain_error("adam_step: non-finite gradient for " + params.name(i));
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  NamedTensors next = params;
  for (std::size_t i = 0; i < next.size(); ++i) {
    Tensor& p = next.tensor(i);
    const Tensor& g = grads.tensor(i);
    std::vector<double>& m = state.first_moment[i];
    std::vector<double>& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= c.learning_rate * c.weight_decay * p[k];
      p[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps_hat);
    }
  }
  return next;
}

}  // namespace tsaug
