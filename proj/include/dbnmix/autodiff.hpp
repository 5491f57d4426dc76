#pragma once

// Tape-based reverse-mode differentiation for small feed-forward networks.
//
// A Tape records every op applied to Vars in creation order. Inputs of a node
// always precede it, so the reverse pass walks the tape backwards without a
// separate topological sort. Parameter leaves are bound to a ParamStore slot
// and backward() accumulates into that slot's gradient buffer.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dbnmix/tensor.hpp"

namespace dbnmix {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor momentum;
};

// Named parameters with gradient and momentum buffers of matching shape.
class ParamStore {
 public:
  // Returned references are invalidated by a later add().
  Parameter& add(std::string name, Tensor init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  // Clears gradients only.
  void zero_grad();

  std::size_t size() const noexcept { return params_.size(); }
  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

class Tape {
 public:
  // grad_in[i] is null when input i does not require a gradient.
  using Pullback = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

  Var constant(Tensor value);
  // The Parameter must outlive the tape (or at least the next backward()).
  Var parameter(Parameter& param);
  Var record(Tensor value, std::vector<Var> inputs, Pullback pullback);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() w.r.t. v (zeros if unreached).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and accumulates into bound parameters.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    Pullback pullback;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// output[b,h] = sum_d input[b,d] * weight[d,h] + bias[h]
Var linear(Var input, Var weight, Var bias);
Var relu(Var x);
Var add(Var a, Var b);
Var scale(Var a, double factor);
// Divides column k of a B x K matrix by temperatures[k].
Var divide_columns(Var z, std::span<const double> temperatures);
// Row-wise log of the softmax, stabilized by the row max.
Var log_softmax(Var z);
// Batch mean of -sum_k targets[b,k] * log_probs[b,k]. Targets may be soft.
Var soft_cross_entropy(Var log_probs, const Tensor& targets);
Var sum(Var a);
Var sum_squares(Var a);

}  // namespace dbnmix
