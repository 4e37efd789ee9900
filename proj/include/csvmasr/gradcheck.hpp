// Copyright 2026 csvmasr authors
// value_and_grad over a ParamStore, the central finite-difference gradient
// oracle, and the randomized per-primitive gradient check suite.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "csvmasr/tensor.hpp"

namespace csvmasr {

// Parameters bound onto a tape as leaves, looked up by name.
class BoundParams {
 public:
  // bind_grads = false binds every leaf grad-free (inference mode).
  BoundParams(Tape& tape, const ParamStore& store, bool bind_grads = true)
      : store_(&store) {
    vars_.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      const auto& e = store.entry(i);
      Tensor t = e.tensor;
      t.requires_grad = bind_grads && e.trainable;
      vars_.push_back(tape.leaf(t, e.name));
    }
  }

  Var operator[](const std::string& name) const {
    for (size_t i = 0; i < store_->size(); ++i)
      if (store_->entry(i).name == name) return vars_[i];
    throw Error("BoundParams: unknown parameter " + name);
  }
  Var at(size_t i) const { return vars_[i]; }
  size_t size() const { return vars_.size(); }

 private:
  const ParamStore* store_;
  std::vector<Var> vars_;
};

// A scalar-valued differentiable computation over the bound parameters.
using Program = std::function<Var(Tape&, const BoundParams&)>;

using GradMap = std::map<std::string, Tensor>;

// Forward-only evaluation; throws if the program output is not a finite
// scalar.
double eval_program(const Program& program, const ParamStore& params);

// Returns the scalar value and one gradient tensor per trainable parameter
// (shape matching). Non-finite intermediate values abort naming the op.
std::pair<double, GradMap> value_and_grad(const Program& program,
                                          const ParamStore& params);

// Central finite differences, one (f(x+eps)-f(x-eps))/(2 eps) per trainable
// entry. The independent oracle for every analytic gradient in this project.
GradMap finite_diff_grad(const Program& program, const ParamStore& params,
                         double epsilon);

// rel = |a-b| / max(|a|, |b|, floor)
double rel_error(double a, double b, double floor = 1e-6);
// Max rel_error across all entries of all tensors present in either map.
double max_grad_rel_error(const GradMap& analytic, const GradMap& numeric,
                          double floor = 1e-6);

struct GradCheckResult {
  std::string op;
  int cases = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  bool all_pass = true;
};

// Randomized gradient checks for every primitive op (and the CTC loss)
// against finite differences: `cases_per_op` random shapes/values per op at
// relative tolerance `tol` in 64-bit.
GradCheckReport run_primitive_gradchecks(uint64_t seed, int cases_per_op = 100,
                                         double tol = 1e-5);

}  // namespace csvmasr
