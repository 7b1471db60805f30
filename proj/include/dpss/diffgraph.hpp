#pragma once

#include "dpss/common.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

// Static computation graphs over row-major matrices with reverse-mode
// gradients. Rows are time frames; a scalar is a 1x1 tensor. Graphs are
// immutable once built and may be evaluated concurrently; every call keeps its
// own scratch storage.
namespace dpss::diffgraph {

using NodeId = std::size_t;

enum class Op {
  input,
  constant,
  affine,       // x[N,in] * W[out,in]^T (+ b[1,out])
  causal_conv,  // out[n] = b + sum_k W_k x[n-K+k], frames before 0 taken from history[K,C]
  gru,          // gated recurrent cell unrolled over rows; output is every hidden state
  relu,
  tanh,
  softplus,
  sin,
  cos,
  add,          // same shape, or b a single row broadcast over a's rows
  mul,          // elementwise
  scale,        // a * scalar
  add_scalar,   // a + scalar
  concat,       // along columns
  slice_cols,   // columns [begin, end)
  logistic_log_density,  // elementwise log Logistic(x; mu, s)
  reduce_sum,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::input;
  std::vector<NodeId> args;
  std::string name;       // input
  double scalar = 0.0;    // scale, add_scalar
  std::size_t begin = 0;  // slice_cols; kernel length for causal_conv
  std::size_t end = 0;    // slice_cols
  Matrix value;           // constant
};

// Named tensors bound to the graph's inputs for one evaluation. Holds
// references; the tensors must outlive the call.
template <typename T>
class Bindings {
 public:
  Bindings& set(const std::string& name, const Tensor<T>& value) {
    values_[name] = &value;
    return *this;
  }
  const Tensor<T>* find(const std::string& name) const {
    auto it = values_.find(name);
    return it == values_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<std::string, const Tensor<T>*> values_;
};

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

template <typename T>
struct GradientResult {
  T value{};               // the scalar output
  TensorMap<T> outputs;    // every named output
  TensorMap<T> gradients;  // one entry per requested input
};

class Graph {
 public:
  // Appends a validated node record. Arguments must refer to existing nodes,
  // so graphs are acyclic by construction.
  NodeId add(Node node);

  NodeId input(const std::string& name);
  NodeId constant(Matrix value);
  NodeId affine(NodeId x, NodeId weight, NodeId bias);
  NodeId linear(NodeId x, NodeId weight);
  NodeId causal_conv(NodeId x, NodeId history, NodeId weight, NodeId bias, std::size_t kernel);
  NodeId gru(NodeId x, NodeId h0, NodeId w_ih, NodeId w_hh, NodeId b_ih, NodeId b_hh);
  NodeId relu(NodeId a) { return unary(Op::relu, a); }
  NodeId tanh(NodeId a) { return unary(Op::tanh, a); }
  NodeId softplus(NodeId a) { return unary(Op::softplus, a); }
  NodeId sin(NodeId a) { return unary(Op::sin, a); }
  NodeId cos(NodeId a) { return unary(Op::cos, a); }
  NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
  NodeId scale(NodeId a, double factor);
  NodeId add_scalar(NodeId a, double offset);
  NodeId concat(NodeId a, NodeId b) { return binary(Op::concat, a, b); }
  NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);
  NodeId logistic_log_density(NodeId x, NodeId mu, NodeId s);
  NodeId reduce_sum(NodeId a) { return unary(Op::reduce_sum, a); }

  void set_output(const std::string& name, NodeId id);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }
  bool has_input(const std::string& name) const { return inputs_.count(name) != 0; }

  template <typename T>
  TensorMap<T> forward(const Bindings<T>& inputs) const;

  // Reverse-mode gradient of a 1x1 node with respect to named inputs.
  template <typename T>
  GradientResult<T> gradient(const Bindings<T>& inputs, NodeId scalar_output,
                             const std::vector<std::string>& wrt) const;

 private:
  NodeId unary(Op op, NodeId a);
  NodeId binary(Op op, NodeId a, NodeId b);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> inputs_;
  std::map<std::string, NodeId> outputs_;
};

}  // namespace dpss::diffgraph
