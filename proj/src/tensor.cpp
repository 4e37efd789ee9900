// Copyright 2026 csvmasr authors
// Tape implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/tensor.hpp"

#include <cmath>

namespace csvmasr {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(const Tensor& t, const std::string& name) {
  CM_CHECK(t.shape.rows > 0 && t.shape.cols > 0,
           "leaf '", name, "' has empty shape ", t.shape.str());
  CM_CHECK(all_finite(t.values), "leaf '", name, "' contains non-finite values");
  Node n;
  n.shape = t.shape;
  n.value = t.values;
  n.requires_grad = t.requires_grad;
  n.op = "leaf";
  return Var{this, push(std::move(n))};
}

Var Tape::constant(Shape shape, std::vector<double> values, const char* op) {
  CM_CHECK(static_cast<int64_t>(values.size()) == shape.size(),
           "constant value count mismatch for shape ", shape.str());
  CM_CHECK(all_finite(values), "op '", op, "' produced a non-finite value");
  Node n;
  n.shape = shape;
  n.value = std::move(values);
  n.requires_grad = false;
  n.op = op;
  return Var{this, push(std::move(n))};
}

Var Tape::emit(Shape shape, std::vector<double> values,
               std::initializer_list<Var> parents, Backward fn,
               const char* op) {
  CM_CHECK(static_cast<int64_t>(values.size()) == shape.size(),
           "op '", op, "' produced value count ", values.size(),
           " for shape ", shape.str());
  if (!all_finite(values))
    throw Error(detail::format_msg("op '", op, "' produced a non-finite value"));
  bool rg = false;
  for (const Var& p : parents) {
    CM_CHECK(p.tape == this, "op '", op, "' mixes tensors from different tapes");
    rg = rg || nodes_[p.id].requires_grad;
  }
  Node n;
  n.shape = shape;
  n.value = std::move(values);
  n.requires_grad = rg;
  n.op = op;
  if (rg) n.backward = std::move(fn);
  return Var{this, push(std::move(n))};
}

std::vector<double>& Tape::grad_acc(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.shape.size(), 0.0);
  return n.grad;
}

Tensor Tape::grad_tensor(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor::zeros(n.shape);
  return Tensor(n.shape, n.grad);
}

void Tape::backward(Var output) {
  CM_CHECK(output.tape == this, "backward: output from another tape");
  const Node& out = nodes_[output.id];
  CM_CHECK(out.shape.size() == 1,
           "backward requires a scalar output, got shape ", out.shape.str());
  if (!out.requires_grad) return;  // constant program: all gradients stay zero
  grad_acc(output.id)[0] = 1.0;
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id, n.grad);
  }
}

}  // namespace csvmasr
