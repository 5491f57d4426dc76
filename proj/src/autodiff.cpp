#include "dbnmix/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dbnmix/errors.hpp"

namespace dbnmix {

Parameter& ParamStore::add(std::string name, Tensor init) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  Tensor grad = Tensor::zeros_like(init);
  Tensor momentum = Tensor::zeros_like(init);
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad), std::move(momentum)});
  return params_.back();
}

Parameter& ParamStore::at(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& param) {
  require_finite(param.value, "parameter '" + param.name + "'");
  nodes_.push_back(Node{param.value, {}, {}, {}, &param, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Pullback pullback) {
  require_finite(value, "op output");
  Node node;
  node.value = std::move(value);
  node.pullback = std::move(pullback);
  for (const Var& v : inputs) {
    if (v.tape != this) throw ContractError("op mixes Vars from different tapes");
    node.inputs.push_back(v.id);
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad.empty() && !n.value.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward on a Var from another tape");
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  root.grad = Tensor(root.value.shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.param != nullptr) {
      node.param->grad += node.grad;
      continue;
    }
    if (!node.pullback) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      Node& in = nodes_[node.inputs[j]];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) in.grad = Tensor::zeros_like(in.value);
      grad_in[j] = &in.grad;
    }
    node.pullback(node.grad, grad_in);
  }
}

Var linear(Var input, Var weight, Var bias) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  Tensor out = linear_forward(x, w, bias.value());
  return input.tape->record(std::move(out), {input, weight, bias},
                            [x, w](const Tensor& g, std::span<Tensor* const> gi) {
                              const std::size_t batch = x.rows(), in = x.cols(), hid = w.cols();
                              if (gi[0]) {
                                Tensor& gx = *gi[0];
                                for (std::size_t b = 0; b < batch; ++b)
                                  for (std::size_t d = 0; d < in; ++d) {
                                    double s = 0.0;
                                    for (std::size_t h = 0; h < hid; ++h) s += g(b, h) * w(d, h);
                                    gx(b, d) += s;
                                  }
                              }
                              if (gi[1]) {
                                Tensor& gw = *gi[1];
                                for (std::size_t b = 0; b < batch; ++b)
                                  for (std::size_t d = 0; d < in; ++d) {
                                    const double xbd = x(b, d);
                                    if (xbd == 0.0) continue;
                                    for (std::size_t h = 0; h < hid; ++h) gw(d, h) += xbd * g(b, h);
                                  }
                              }
                              if (gi[2]) {
                                Tensor& gb = *gi[2];
                                for (std::size_t b = 0; b < batch; ++b)
                                  for (std::size_t h = 0; h < hid; ++h) gb[h] += g(b, h);
                              }
                            });
}

Var relu(Var x) {
  const Tensor& in = x.value();
  Tensor out = relu(in);
  return x.tape->record(std::move(out), {x}, [in](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) (*gi[0])[i] += g[i];
    }
  });
}

Var add(Var a, Var b) {
  Tensor out = a.value();
  out += b.value();
  return a.tape->record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) *gi[0] += g;
    if (gi[1]) *gi[1] += g;
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape->record(std::move(out), {a}, [factor](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
  });
}

Var divide_columns(Var z, std::span<const double> temperatures) {
  const Tensor& in = z.value();
  if (in.cols() != temperatures.size()) {
    throw DimensionError("divide_columns: " + std::to_string(in.cols()) + " columns, " +
                         std::to_string(temperatures.size()) + " temperatures");
  }
  std::vector<double> temps(temperatures.begin(), temperatures.end());
  Tensor out = in;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] /= temps[k];
  }
  return z.tape->record(std::move(out), {z}, [temps](const Tensor& g, std::span<Tensor* const> gi) {
    Tensor& gz = *gi[0];
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t k = 0; k < temps.size(); ++k) gz(r, k) += g(r, k) / temps[k];
  });
}

Var log_softmax(Var z) {
  const Tensor& in = z.value();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto src = in.row(r);
    auto dst = out.row(r);
    const double m = *std::max_element(src.begin(), src.end());
    double s = 0.0;
    for (double v : src) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] - lse;
  }
  Tensor saved = out;
  return z.tape->record(std::move(out), {z}, [saved](const Tensor& g, std::span<Tensor* const> gi) {
    // d/dz_j = g_j - softmax_j * sum_k g_k
    Tensor& gz = *gi[0];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      double total = 0.0;
      for (double v : gr) total += v;
      auto lp = saved.row(r);
      for (std::size_t k = 0; k < gr.size(); ++k) gz(r, k) += gr[k] - std::exp(lp[k]) * total;
    }
  });
}

Var soft_cross_entropy(Var log_probs, const Tensor& targets) {
  const Tensor& lp = log_probs.value();
  if (targets.shape() != lp.shape()) {
    throw DimensionError("cross entropy: targets " + shape_string(targets.shape()) + " vs " +
                         shape_string(lp.shape()));
  }
  const std::size_t batch = lp.rows();
  if (batch == 0) throw ContractError("cross entropy over an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (targets[i] != 0.0) total -= targets[i] * lp[i];
  }
  const double inv = 1.0 / static_cast<double>(batch);
  return log_probs.tape->record(Tensor::scalar(total * inv), {log_probs},
                                [targets, inv](const Tensor& g, std::span<Tensor* const> gi) {
                                  const double s = g[0] * inv;
                                  for (std::size_t i = 0; i < targets.size(); ++i) (*gi[0])[i] -= s * targets[i];
                                });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->record(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (double& v : gi[0]->data()) v += g[0];
  });
}

Var sum_squares(Var a) {
  const Tensor& in = a.value();
  double s = 0.0;
  for (double v : in.data()) s += v * v;
  return a.tape->record(Tensor::scalar(s), {a}, [in](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < in.size(); ++i) (*gi[0])[i] += 2.0 * in[i] * g[0];
  });
}

}  // namespace dbnmix
