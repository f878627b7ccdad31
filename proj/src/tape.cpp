#include "smith/tape.hpp"

#include <stdexcept>

namespace smith {

int Tensor::rows() const { return static_cast<int>(tape_->node(id_).value.rows()); }
int Tensor::cols() const { return static_cast<int>(tape_->node(id_).value.cols()); }

const Mat& Tensor::value() const { return tape_->node(id_).value; }

Mat Tensor::grad() const {
  const Tape::Node& n = tape_->node(id_);
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

Tensor Tape::emplace(Mat value, std::vector<int> parents, PullFn pull) {
  bool needs_grad = false;
  for (int p : parents)
    needs_grad = needs_grad || nodes_[static_cast<size_t>(p)].requires_grad;
  return emplace(std::move(value), std::move(parents), std::move(pull), needs_grad);
}

Tensor Tape::emplace(Mat value, std::vector<int> parents, PullFn pull, bool requires_grad) {
  if (!value.allFinite()) throw std::runtime_error("non-finite values in tensor op output");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.parents = std::move(parents);
  if (requires_grad) node.pull = std::move(pull);
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Tensor loss) {
  if (loss.tape() != this) throw std::invalid_argument("loss tensor is on a different tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward requires a scalar (1x1) loss");
  if (!node(loss.id()).requires_grad) return;
  grad_buffer(loss.id())(0, 0) += 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad && n.grad.size() != 0 && n.pull) n.pull(*this, i);
  }
}

}  // namespace smith
