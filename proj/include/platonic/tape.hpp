#pragma once

#include "platonic/tensor.hpp"

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace platonic {

// Reverse-mode tape. Nodes are appended in evaluation order, which is by
// construction a topological order, so backward is a single reverse sweep.
template <class S>
class Tape {
 public:
  // Receives the tape, the node's own adjoint and the full adjoint buffer;
  // accumulates into the adjoints of the node's parents.
  using BackwardFn =
      std::function<void(Tape&, const Tensor<S>& self_adj, std::vector<Tensor<S>>& adjoints)>;

  struct Node {
    Tensor<S> value;
    std::vector<int> parents;
    BackwardFn backward;  // empty for leaves
  };

  int push(Tensor<S> value, std::vector<int> parents, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int leaf(Tensor<S> value) { return push(std::move(value), {}, {}); }

  const Tensor<S>& value(int id) const { return nodes_[id].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Adjoint of `loss` w.r.t. every node. `loss` must be scalar.
  std::vector<Tensor<S>> backward(int loss) const {
    if (nodes_[loss].value.size() != 1)
      throw std::invalid_argument("backward: loss node is not scalar");
    std::vector<Tensor<S>> adj(nodes_.size());
    std::vector<char> live(nodes_.size(), 0);
    live[loss] = 1;
    for (int i = loss; i >= 0; --i)
      if (live[i])
        for (int p : nodes_[i].parents) live[p] = 1;
    for (int i = 0; i <= loss; ++i)
      if (live[i]) adj[i] = Tensor<S>::zeros(nodes_[i].value.dims);
    adj[loss].v[0] = S(1);
    for (int i = loss; i >= 0; --i) {
      if (!live[i] || !nodes_[i].backward) continue;
      nodes_[i].backward(const_cast<Tape&>(*this), adj[i], adj);
    }
    return adj;
  }

 private:
  std::vector<Node> nodes_;
};

// Lightweight handle to a tape node.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Tensor<S>& value() const { return tape->value(id); }
  const Shape& dims() const { return value().dims; }
};

template <class S>
Var<S> make_leaf(Tape<S>& tape, Tensor<S> value) {
  return Var<S>{&tape, tape.leaf(std::move(value))};
}

}  // namespace platonic
