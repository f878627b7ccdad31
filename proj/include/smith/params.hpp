#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "smith/tape.hpp"

namespace smith {

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
};

// Named, ordered parameter registry. Creation order is the checkpoint order.
class ParameterStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  size_t count() const { return params_.size(); }
  size_t scalar_count() const;

  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Per-step bridge between a ParameterStore and a Tape: parameters become
// leaf tensors on first use; harvest() moves accumulated node gradients back
// into the store.
class TapeBinding {
 public:
  TapeBinding(Tape& tape, ParameterStore& store) : tape_(tape), store_(store) {}

  Tensor get(const std::string& name);
  void harvest();

 private:
  Tape& tape_;
  ParameterStore& store_;
  std::unordered_map<std::string, Tensor> bound_;
};

}  // namespace smith
