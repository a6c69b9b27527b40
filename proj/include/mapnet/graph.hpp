#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mapnet/tensor.hpp"

namespace mapnet {

// Handle to a node of a Graph.
struct Var {
  int id = -1;
  [[nodiscard]] bool valid() const { return id >= 0; }
  friend bool operator==(Var, Var) = default;
};

enum class OpKind {
  input,
  parameter,
  conv2d,
  max_pool,
  avg_pool,
  bilinear,
  batch_norm,
  relu,
  sigmoid,
  dense,
  concat,
  add,
  scale_channels,
  reduce,
  loss,
  custom,
};

template <typename T>
class Graph;

// View handed to a node's backward function.
template <typename T>
class BackwardContext {
 public:
  BackwardContext(Graph<T>& graph, int node) : graph_(graph), node_(node) {}

  [[nodiscard]] const Tensor<T>& grad_output() const;
  [[nodiscard]] const Tensor<T>& output() const;
  [[nodiscard]] const Tensor<T>& value(Var v) const;
  [[nodiscard]] bool needs_grad(Var v) const;
  // Gradient accumulator of v, zero-initialised on first access.
  Tensor<T>& grad(Var v);

 private:
  Graph<T>& graph_;
  int node_;
};

// Tape of recorded operations. Nodes are appended in execution order, so
// tape order is a topological order. References returned by value() stay
// valid while further ops are recorded. A Graph is single-owner: one
// forward record, then backward.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(BackwardContext<T>&)>;

  Var input(Tensor<T> value, bool requires_grad = false) {
    return push(OpKind::input, std::move(value), {}, {}, requires_grad, 0);
  }

  // Trainable named leaf.
  Var parameter(std::string name, Tensor<T> value) {
    const Var v = push(OpKind::parameter, std::move(value), {}, {}, true, 0);
    parameters_.emplace_back(std::move(name), v);
    return v;
  }

  Var record(OpKind kind, Tensor<T> value, std::vector<Var> inputs, BackwardFn backward,
             std::uint64_t macs = 0) {
    bool needs = false;
    for (Var in : inputs) {
      check(in);
      needs = needs || nodes_[in.id].requires_grad;
    }
    return push(kind, std::move(value), std::move(inputs), std::move(backward), needs, macs);
  }

  [[nodiscard]] const Tensor<T>& value(Var v) const { return node(v).value; }
  [[nodiscard]] OpKind kind(Var v) const { return node(v).kind; }
  [[nodiscard]] const std::vector<Var>& inputs(Var v) const { return node(v).inputs; }
  [[nodiscard]] const std::string& scope(Var v) const { return node(v).scope; }
  [[nodiscard]] bool requires_grad(Var v) const { return node(v).requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  // Copy of the accumulated gradient; zeros when nothing flowed into v.
  [[nodiscard]] Tensor<T> gradient(Var v) const {
    const Node& n = node(v);
    return n.grad ? *n.grad : Tensor<T>(n.value.shape());
  }

  [[nodiscard]] const std::vector<std::pair<std::string, Var>>& parameters() const {
    return parameters_;
  }

  // Gradient of every parameter by name, zeros for unused ones.
  [[nodiscard]] std::map<std::string, Tensor<T>> parameter_gradients() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, v] : parameters_) out.emplace(name, gradient(v));
    return out;
  }

  // Sum of multiply-accumulates recorded by conv and dense nodes.
  [[nodiscard]] std::uint64_t macs() const {
    std::uint64_t total = 0;
    for (const Node& n : nodes_) total += n.macs;
    return total;
  }
  [[nodiscard]] std::uint64_t macs(Var v) const { return node(v).macs; }

  void backward(Var out) {
    check(out);
    if (node(out).value.size() != 1) {
      throw UsageError("backward requires a scalar output, got shape " +
                       node(out).value.shape().str());
    }
    zero_grad();
    nodes_[out.id].grad = Tensor<T>(nodes_[out.id].value.shape(), T{1});
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.grad || !n.requires_grad || !n.backward) continue;
      BackwardContext<T> ctx(*this, i);
      n.backward(ctx);
    }
  }

  void zero_grad() {
    for (Node& n : nodes_) n.grad.reset();
  }

  // Nodes recorded while a scope is active carry its label; scopes nest
  // with '/'.
  void push_scope(const std::string& name) {
    scopes_.push_back(scopes_.empty() ? name : scopes_.back() + "/" + name);
  }
  void pop_scope() { scopes_.pop_back(); }

  class Scope {
   public:
    Scope(Graph& g, const std::string& name) : g_(g) { g_.push_scope(name); }
    ~Scope() { g_.pop_scope(); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph& g_;
  };

 private:
  friend class BackwardContext<T>;

  struct Node {
    OpKind kind;
    Tensor<T> value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad;
    std::uint64_t macs;
    std::string scope;
    std::optional<Tensor<T>> grad;
  };

  Var push(OpKind kind, Tensor<T> value, std::vector<Var> inputs, BackwardFn backward,
           bool requires_grad, std::uint64_t macs) {
    nodes_.push_back(Node{kind, std::move(value), std::move(inputs), std::move(backward),
                          requires_grad, macs, scopes_.empty() ? std::string{} : scopes_.back(),
                          std::nullopt});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      throw UsageError("variable " + std::to_string(v.id) + " does not belong to this graph");
    }
  }
  const Node& node(Var v) const {
    check(v);
    return nodes_[v.id];
  }

  std::deque<Node> nodes_;
  std::vector<std::pair<std::string, Var>> parameters_;
  std::vector<std::string> scopes_;
};

template <typename T>
const Tensor<T>& BackwardContext<T>::grad_output() const {
  return *graph_.nodes_[node_].grad;
}

template <typename T>
const Tensor<T>& BackwardContext<T>::output() const {
  return graph_.nodes_[node_].value;
}

template <typename T>
const Tensor<T>& BackwardContext<T>::value(Var v) const {
  return graph_.nodes_[v.id].value;
}

template <typename T>
bool BackwardContext<T>::needs_grad(Var v) const {
  return graph_.nodes_[v.id].requires_grad;
}

template <typename T>
Tensor<T>& BackwardContext<T>::grad(Var v) {
  auto& n = graph_.nodes_[v.id];
  if (!n.grad) n.grad = Tensor<T>(n.value.shape());
  return *n.grad;
}

}  // namespace mapnet
