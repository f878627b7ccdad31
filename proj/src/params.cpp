#include "smith/params.hpp"

#include <stdexcept>

namespace smith {

Parameter& ParameterStore::create(const std::string& name, int rows, int cols) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  p->adam_m = Mat::Zero(rows, cols);
  p->adam_v = Mat::Zero(rows, cols);
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *params_[it->second];
}

size_t ParameterStore::scalar_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p->grad.setZero();
}

Tensor TapeBinding::get(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Tensor t = tape_.leaf(store_.at(name).value, true);
  bound_.emplace(name, t);
  return t;
}

void TapeBinding::harvest() {
  for (auto& [name, tensor] : bound_) {
    const Tape::Node& node = tape_.node(tensor.id());
    if (node.grad.size() != 0) store_.at(name).grad += node.grad;
  }
}

}  // namespace smith
