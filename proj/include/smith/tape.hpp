#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace smith {

// All compute is double precision; storage is row-major so flat views match
// the shape contract everywhere.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

// Lightweight handle to a node on a Tape. Copyable; does not own anything.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  int rows() const;
  int cols() const;
  const Mat& value() const;
  // Gradient accumulated by Tape::backward; zeros if this node was never
  // reached.
  Mat grad() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Record of one forward pass. Nodes are appended in topological order;
// backward() walks them in exact reverse order. Every op checks its output
// for non-finite values and throws, so a NaN surfaces where it was created.
class Tape {
 public:
  using PullFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Mat value) { return emplace(std::move(value), {}, nullptr, false); }
  Tensor leaf(Mat value, bool requires_grad) {
    return emplace(std::move(value), {}, nullptr, requires_grad);
  }

  // loss must be 1x1. Gradients accumulate additively across fan-out.
  void backward(Tensor loss);

  size_t size() const { return nodes_.size(); }

  struct Node {
    Mat value;
    Mat grad;  // empty until touched
    bool requires_grad = false;
    std::vector<int> parents;
    PullFn pull;
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  // Appends a node. requires_grad defaults to "any parent requires grad".
  Tensor emplace(Mat value, std::vector<int> parents, PullFn pull);
  Tensor emplace(Mat value, std::vector<int> parents, PullFn pull, bool requires_grad);

  // Zero-initialized gradient buffer for node id, allocating on first use.
  Mat& grad_buffer(int id);

 private:
  std::vector<Node> nodes_;
};

}  // namespace smith
