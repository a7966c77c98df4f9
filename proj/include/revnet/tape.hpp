#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "revnet/tensor.hpp"

namespace revnet {

enum class Precision { f64, f32 };

// Handle to a node on a Tape. Only valid for the tape that created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records every executed operation in order; the backward pass walks the
// record in exact reverse order. One tape per forward pass, single-threaded.
// Parameters are bound by address so gradients can be read back per tensor.
//
// Every forward result is checked for finiteness; a NaN/Inf aborts with a
// NumericError naming the offending op. In f32 mode each result is rounded
// through float so all stored values are exactly representable in 32 bits.
class Tape {
 public:
  explicit Tape(Precision precision = Precision::f64, bool record = true);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Precision precision() const { return precision_; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaves.
  Var constant(Tensor value);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }
  Var zeros(int n) { return constant(Tensor({n})); }
  // Binds a parameter tensor; repeated calls with the same address return the
  // same node so gradients accumulate in one place.
  Var param(const Tensor& storage);

  // Elementwise / arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var v, Var s);  // v[n] + broadcast s[1]
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var relu(Var a);

  // Matrix product with rank dispatch: [m,k]x[k,n] -> [m,n]; a rank-1 operand
  // is treated as a row (lhs) or column (rhs) and the result is squeezed.
  Var matmul(Var a, Var b);

  // Structure.
  Var concat(std::span<const Var> parts);    // rank-1 parts -> one vector
  Var slice(Var v, int offset, int length);  // rank-1 segment
  Var stack_rows(std::span<const Var> rows);  // k vectors [n] -> [k,n]
  Var row(Var m, int r);                      // [k,n] -> [n]
  Var select(Var v, int i);                   // element -> [1]
  // Embedding gather: row lookup with a data-level id check.
  Var embed(Var table, int id);

  // Reductions.
  Var sum(Var v);
  Var mean(Var v);
  Var reduce_max(Var v);  // rank-1 -> [1], subgradient to lowest argmax
  Var max_rows(Var m);    // [k,n] -> [n], per-column max over rows

  // Softmax family (max-subtracted for stability).
  Var softmax(Var v);
  Var log_softmax(Var v);

  const Tensor& value(Var v) const;

  // Reverse sweep from a scalar loss. May run once per tape.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  // Gradient of the loss w.r.t. a node; zeros if the node cannot reach the
  // loss. Requires backward() to have run.
  Tensor grad(Var v) const;
  // Gradient keyed by parameter storage; zeros(shape) for unbound parameters.
  Tensor grad_of(const Tensor& storage) const;

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    std::function<void(Tape&, int)> back;
    const char* op = "";
  };

  Var push(const char* op, Tensor value, std::vector<int> inputs, std::function<void(Tape&, int)> back);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buf(int id) { return grads_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Tensor*, int> params_;
  Precision precision_;
  bool record_;
  bool backward_done_ = false;
};

// Reverse-mode gradients of a scalar loss for a set of parameters, in input
// order. Parameters that do not reach the loss get zero gradients.
std::vector<Tensor> gradient_of(Tape& tape, Var loss, std::span<const Tensor* const> params);

}  // namespace revnet
