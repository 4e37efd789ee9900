// Copyright 2026 csvmasr authors
// Minimal reverse-mode tensor engine. Tensors are row-major rank-2 arrays of
// doubles; a Tape owns the computation graph of one forward pass. Nodes are
// topologically ordered by construction (parents always precede children),
// so backward is a single reverse sweep. Values are immutable once emitted.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "csvmasr/common.hpp"
#include "csvmasr/rng.hpp"

namespace csvmasr {

struct Shape {
  int rows = 0;
  int cols = 0;

  int64_t size() const { return static_cast<int64_t>(rows) * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v, bool rg = false)
      : shape(s), values(std::move(v)), requires_grad(rg) {
    CM_CHECK(static_cast<int64_t>(values.size()) == shape.size(),
             "tensor value count ", values.size(), " does not match shape ",
             shape.str());
  }

  static Tensor zeros(Shape s, bool rg = false) {
    return Tensor(s, std::vector<double>(s.size(), 0.0), rg);
  }
  static Tensor full(Shape s, double v, bool rg = false) {
    return Tensor(s, std::vector<double>(s.size(), v), rg);
  }
  static Tensor randn(Shape s, Rng& rng, double stddev = 1.0, bool rg = false) {
    std::vector<double> v(s.size());
    for (auto& x : v) x = rng.gaussian(0.0, stddev);
    return Tensor(s, std::move(v), rg);
  }

  double& at(int r, int c) { return values[static_cast<int64_t>(r) * shape.cols + c]; }
  double at(int r, int c) const {
    return values[static_cast<int64_t>(r) * shape.cols + c];
  }
};

// Ordered parameter dictionary. Iteration order is the insertion order,
// which makes every reduction over parameters deterministic.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor t, bool trainable = true) {
    CM_CHECK(index_.find(name) == index_.end(), "duplicate parameter name: ",
             name);
    t.requires_grad = trainable;
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, std::move(t), trainable});
    return entries_.back().tensor;
  }

  bool contains(const std::string& name) const {
    return index_.find(name) != index_.end();
  }
  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    CM_CHECK(it != index_.end(), "unknown parameter: ", name);
    return entries_[it->second].tensor;
  }
  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    CM_CHECK(it != index_.end(), "unknown parameter: ", name);
    return entries_[it->second].tensor;
  }

  size_t size() const { return entries_.size(); }
  const Entry& entry(size_t i) const { return entries_[i]; }
  Entry& entry(size_t i) { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  int64_t value_count(bool trainable_only = false) const {
    int64_t n = 0;
    for (const auto& e : entries_)
      if (!trainable_only || e.trainable) n += e.tensor.shape.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Shape& shape() const;
  const std::vector<double>& value() const;
  double scalar() const;
  bool requires_grad() const;
  int rows() const { return shape().rows; }
  int cols() const { return shape().cols; }
};

class Tape {
 public:
  using Backward =
      std::function<void(Tape&, int self, const std::vector<double>& gout)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const Tensor& t, const std::string& name = "leaf");
  Var constant(Shape shape, std::vector<double> values,
               const char* op = "const");

  // Records a new node. `parents` determine grad propagation; `fn` pulls the
  // node's output gradient into its parents (may be empty when no parent
  // requires grad). Forward values are checked for finiteness here; a
  // non-finite entry aborts the pass naming the offending op.
  Var emit(Shape shape, std::vector<double> values,
           std::initializer_list<Var> parents, Backward fn, const char* op);

  // Reverse sweep from a scalar output. Gradients accumulate on every node
  // that requires grad; leaves can then be read via grad().
  void backward(Var output);

  const Shape& shape_of(int id) const { return nodes_[id].shape; }
  const std::vector<double>& value_of(int id) const { return nodes_[id].value; }
  bool requires_grad_of(int id) const { return nodes_[id].requires_grad; }
  const char* op_of(int id) const { return nodes_[id].op; }

  // Gradient buffer for accumulation; allocates zeros on first touch.
  std::vector<double>& grad_acc(int id);
  // Read-only gradient; zeros tensor if the node was never touched.
  Tensor grad_tensor(Var v) const;

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until touched
    bool requires_grad = false;
    const char* op = "leaf";
    Backward backward;
  };

  int push(Node n);

  std::vector<Node> nodes_;
};

inline const Shape& Var::shape() const { return tape->shape_of(id); }
inline const std::vector<double>& Var::value() const {
  return tape->value_of(id);
}
inline double Var::scalar() const {
  CM_CHECK(shape().size() == 1, "scalar() on tensor of shape ", shape().str());
  return value()[0];
}
inline bool Var::requires_grad() const { return tape->requires_grad_of(id); }

}  // namespace csvmasr
