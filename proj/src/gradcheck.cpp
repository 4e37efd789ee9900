// Copyright 2026 csvmasr authors
// Gradient checking implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/gradcheck.hpp"

#include <cmath>

#include "csvmasr/losses.hpp"
#include "csvmasr/ops.hpp"
#include "csvmasr/rng.hpp"

namespace csvmasr {

double eval_program(const Program& program, const ParamStore& params) {
  Tape tape;
  BoundParams bound(tape, params);
  Var out = program(tape, bound);
  CM_CHECK(out.shape().size() == 1,
           "program output is not scalar: shape ", out.shape().str());
  return out.scalar();
}

std::pair<double, GradMap> value_and_grad(const Program& program,
                                          const ParamStore& params) {
  Tape tape;
  BoundParams bound(tape, params);
  Var out = program(tape, bound);
  CM_CHECK(out.shape().size() == 1,
           "program output is not scalar: shape ", out.shape().str());
  double value = out.scalar();
  tape.backward(out);
  GradMap grads;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (!e.trainable) continue;
    grads.emplace(e.name, tape.grad_tensor(bound.at(i)));
  }
  return {value, std::move(grads)};
}

GradMap finite_diff_grad(const Program& program, const ParamStore& params,
                         double epsilon) {
  CM_CHECK(epsilon > 0.0, "finite_diff_grad: epsilon must be positive, got ",
           epsilon);
  ParamStore work;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    work.add(e.name, e.tensor, e.trainable);
  }
  GradMap grads;
  for (size_t i = 0; i < work.size(); ++i) {
    auto& e = work.entry(i);
    if (!e.trainable) continue;
    Tensor grad = Tensor::zeros(e.tensor.shape);
    for (int64_t j = 0; j < e.tensor.shape.size(); ++j) {
      double saved = e.tensor.values[j];
      e.tensor.values[j] = saved + epsilon;
      double fp = eval_program(program, work);
      e.tensor.values[j] = saved - epsilon;
      double fm = eval_program(program, work);
      e.tensor.values[j] = saved;
      grad.values[j] = (fp - fm) / (2.0 * epsilon);
    }
    grads.emplace(e.name, std::move(grad));
  }
  return grads;
}

double rel_error(double a, double b, double floor) {
  double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

double max_grad_rel_error(const GradMap& analytic, const GradMap& numeric,
                          double floor) {
  CM_CHECK(analytic.size() == numeric.size(),
           "gradient maps differ in size: ", analytic.size(), " vs ",
           numeric.size());
  double worst = 0.0;
  for (const auto& [name, ga] : analytic) {
    auto it = numeric.find(name);
    CM_CHECK(it != numeric.end(), "gradient missing from numeric map: ", name);
    const Tensor& gn = it->second;
    CM_CHECK(ga.shape == gn.shape, "gradient shape mismatch for ", name);
    for (int64_t i = 0; i < ga.shape.size(); ++i)
      worst = std::max(worst, rel_error(ga.values[i], gn.values[i], floor));
  }
  return worst;
}

namespace {

// One randomized case: builds params + a scalar program around a single op,
// then compares analytic and finite-difference gradients.
struct Case {
  ParamStore params;
  Program program;
};

using CaseGen = std::function<Case(Rng&)>;

Tensor rand_tensor(Rng& rng, int rows, int cols, double stddev = 1.0) {
  return Tensor::randn(Shape{rows, cols}, rng, stddev, true);
}

// Weighted sum with fixed random weights turns any tensor output into an
// informative scalar.
Program weighted_sum_of(std::function<Var(Tape&, const BoundParams&)> body,
                        Shape out_shape, Rng& rng) {
  std::vector<double> w(out_shape.size());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return [body = std::move(body), out_shape, w](Tape& t, const BoundParams& p) {
    Var y = body(t, p);
    Var weights = t.constant(out_shape, w, "case_weights");
    return sum_all(mul(y, weights));
  };
}

uint64_t fnv1a(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s != '\0'; ++s) {
    h ^= static_cast<uint64_t>(static_cast<unsigned char>(*s));
    h *= 0x100000001b3ULL;
  }
  return h;
}

GradCheckResult run_case_set(const char* op_name, int cases, double tol,
                             uint64_t seed, const CaseGen& gen) {
  GradCheckResult r;
  r.op = op_name;
  r.cases = cases;
  Rng rng(Rng::derive(seed, {fnv1a(op_name)}));
  for (int c = 0; c < cases; ++c) {
    Case cs = gen(rng);
    auto [value, analytic] = value_and_grad(cs.program, cs.params);
    (void)value;
    GradMap numeric = finite_diff_grad(cs.program, cs.params, 1e-5);
    // Floor 1e-3: below it the comparison is absolute at tol*floor = 1e-8,
    // which is what central differences can certify for near-zero entries.
    r.max_rel_err = std::max(r.max_rel_err,
                             max_grad_rel_error(analytic, numeric, 1e-3));
  }
  r.pass = r.max_rel_err < tol;
  return r;
}

int rdim(Rng& rng, int lo = 1, int hi = 5) {
  return static_cast<int>(rng.uniform_int(lo, hi));
}

}  // namespace

GradCheckReport run_primitive_gradchecks(uint64_t seed, int cases_per_op,
                                         double tol) {
  GradCheckReport report;
  auto run = [&](const char* name, const CaseGen& gen) {
    GradCheckResult r = run_case_set(name, cases_per_op, tol, seed, gen);
    report.all_pass = report.all_pass && r.pass;
    report.results.push_back(std::move(r));
  };

  run("matmul", [](Rng& rng) {
    int m = rdim(rng), k = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("a", rand_tensor(rng, m, k));
    cs.params.add("b", rand_tensor(rng, k, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return matmul(p["a"], p["b"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("add", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("a", rand_tensor(rng, m, n));
    cs.params.add("b", rand_tensor(rng, m, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return add(p["a"], p["b"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("add_rowvec", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.params.add("b", rand_tensor(rng, 1, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return add_rowvec(p["x"], p["b"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("add_colvec", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.params.add("c", rand_tensor(rng, m, 1));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return add_colvec(p["x"], p["c"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("mul", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("a", rand_tensor(rng, m, n));
    cs.params.add("b", rand_tensor(rng, m, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return mul(p["a"], p["b"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("scale_rows", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.params.add("w", rand_tensor(rng, m, 1));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return scale_rows(p["x"], p["w"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("scale_all", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.params.add("s", rand_tensor(rng, 1, 1));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return scale_all(p["x"], p["s"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("layer_norm", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng, 3, 6);
    Case cs;
    // Column ramp keeps every row's variance away from zero, where the
    // third derivative would swamp the finite-difference oracle.
    Tensor x = rand_tensor(rng, m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) x.at(i, j) += 3.0 * j;
    cs.params.add("x", std::move(x));
    cs.params.add("g", rand_tensor(rng, 1, n));
    cs.params.add("b", rand_tensor(rng, 1, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) {
          return layer_norm(p["x"], p["g"], p["b"]);
        },
        Shape{m, n}, rng);
    return cs;
  });

  run("masked_softmax", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng, 2, 6);
    std::vector<uint8_t> mask(static_cast<size_t>(m) * n, 0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j)
        mask[static_cast<size_t>(i) * n + j] = rng.bernoulli(0.6) ? 1 : 0;
      mask[static_cast<size_t>(i) * n +
           static_cast<size_t>(rng.uniform_int(0, n - 1))] = 1;
    }
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.program = weighted_sum_of(
        [mask](Tape&, const BoundParams& p) {
          return masked_softmax(p["x"], mask);
        },
        Shape{m, n}, rng);
    return cs;
  });

  run("logsumexp", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return logsumexp_rows(p["x"]); },
        Shape{m, 1}, rng);
    return cs;
  });

  run("conv1d_depthwise", [](Rng& rng) {
    int T = rdim(rng, 1, 6), C = rdim(rng, 1, 4);
    int K = 2 * rdim(rng, 0, 2) + 1;
    Case cs;
    cs.params.add("x", rand_tensor(rng, T, C));
    cs.params.add("w", rand_tensor(rng, K, C));
    cs.params.add("b", rand_tensor(rng, 1, C));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) {
          return conv1d_depthwise(p["x"], p["w"], p["b"]);
        },
        Shape{T, C}, rng);
    return cs;
  });

  run("swish", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n, 2.0));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return swish(p["x"]); },
        Shape{m, n}, rng);
    return cs;
  });

  run("glu", [](Rng& rng) {
    int m = rdim(rng), h = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, 2 * h));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return glu_rows(p["x"]); },
        Shape{m, h}, rng);
    return cs;
  });

  run("gather_rows", [](Rng& rng) {
    int rows = rdim(rng, 2, 6), cols = rdim(rng), n = rdim(rng, 1, 6);
    std::vector<int> ids(n);
    for (auto& id : ids) id = static_cast<int>(rng.uniform_int(0, rows - 1));
    Case cs;
    cs.params.add("table", rand_tensor(rng, rows, cols));
    cs.program = weighted_sum_of(
        [ids](Tape&, const BoundParams& p) {
          return gather_rows(p["table"], ids);
        },
        Shape{n, cols}, rng);
    return cs;
  });

  run("cross_entropy", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng, 2, 6);
    std::vector<int> ids(m);
    for (auto& id : ids) id = static_cast<int>(rng.uniform_int(0, n - 1));
    Case cs;
    cs.params.add("logits", rand_tensor(rng, m, n));
    cs.program = [ids](Tape&, const BoundParams& p) {
      return cross_entropy_mean(p["logits"], ids);
    };
    return cs;
  });

  run("transpose", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng);
    Case cs;
    cs.params.add("x", rand_tensor(rng, m, n));
    cs.program = weighted_sum_of(
        [](Tape&, const BoundParams& p) { return transpose(p["x"]); },
        Shape{n, m}, rng);
    return cs;
  });

  run("concat_slice", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng), m2 = rdim(rng);
    Case cs;
    cs.params.add("a", rand_tensor(rng, m, n));
    cs.params.add("b", rand_tensor(rng, m2, n));
    int r0 = static_cast<int>(rng.uniform_int(0, m + m2 - 1));
    int r1 = static_cast<int>(rng.uniform_int(r0 + 1, m + m2));
    cs.program = weighted_sum_of(
        [r0, r1](Tape&, const BoundParams& p) {
          return slice_rows(concat_rows(p["a"], p["b"]), r0, r1);
        },
        Shape{r1 - r0, n}, rng);
    return cs;
  });

  run("concat_cols_slice_cols", [](Rng& rng) {
    int m = rdim(rng), n = rdim(rng), n2 = rdim(rng);
    Case cs;
    cs.params.add("a", rand_tensor(rng, m, n));
    cs.params.add("b", rand_tensor(rng, m, n2));
    int c0 = static_cast<int>(rng.uniform_int(0, n + n2 - 1));
    int c1 = static_cast<int>(rng.uniform_int(c0 + 1, n + n2));
    cs.program = weighted_sum_of(
        [c0, c1](Tape&, const BoundParams& p) {
          return slice_cols(concat_cols(p["a"], p["b"]), c0, c1);
        },
        Shape{m, c1 - c0}, rng);
    return cs;
  });

  run("ctc_loss", [](Rng& rng) {
    int V = rdim(rng, 2, 4);
    int U = rdim(rng, 0, 2);
    std::vector<int> target(U);
    for (auto& y : target) y = static_cast<int>(rng.uniform_int(1, V - 1));
    int tmin = ctc_min_frames(target);
    int T = tmin + rdim(rng, std::max(1 - tmin, 0), 3);
    Case cs;
    cs.params.add("logits", rand_tensor(rng, T, V));
    cs.program = [target](Tape&, const BoundParams& p) {
      return ctc_loss(log_softmax_rows(p["logits"]), target, 0);
    };
    return cs;
  });

  return report;
}

}  // namespace csvmasr
