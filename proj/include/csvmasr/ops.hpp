// Copyright 2026 csvmasr authors
// Differentiable primitive ops over tape tensors. The arithmetic core is
// matmul, add, elementwise multiply, layer norm, masked softmax, logsumexp,
// depthwise 1-D convolution, swish, GLU, embedding gather and cross-entropy;
// the rest are structural (slice/concat/reshape/transpose) or thin
// compositions.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <vector>

#include "csvmasr/tensor.hpp"

namespace csvmasr {

// ---- arithmetic ----
Var add(Var a, Var b);                 // same shape
Var add_rowvec(Var x, Var b);          // x: n×m, b: 1×m broadcast down rows
Var add_colvec(Var x, Var c);          // x: n×m, c: n×1 broadcast across cols
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // Hadamard
Var scale(Var x, double c);
Var scale_rows(Var x, Var w);          // w: n×1, row i scaled by w[i]
Var scale_all(Var x, Var s);           // s: 1×1
Var matmul(Var a, Var b);
Var sum_all(Var x);                    // 1×1

// ---- structure ----
Var transpose(Var x);
Var concat_rows(Var a, Var b);
Var concat_cols(Var a, Var b);
Var slice_rows(Var x, int r0, int r1);  // half-open [r0, r1)
Var slice_cols(Var x, int c0, int c1);
Var reshape(Var x, Shape s);
inline Var row(Var x, int r) { return slice_rows(x, r, r + 1); }

// ---- nonlinear / normalizing ----
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);  // per row

// Row-wise softmax restricted to mask-active entries. Inactive entries are
// exactly zero and are never read, so perturbing them cannot change the
// output. `mask` has either x.cols entries (broadcast to every row) or
// x.rows*x.cols entries. Rows must have at least one active entry.
Var masked_softmax(Var x, const std::vector<uint8_t>& mask);
Var softmax_rows(Var x);

Var logsumexp_rows(Var x);   // n×1
Var log_softmax_rows(Var x); // x - logsumexp(x), composition
Var swish(Var x);            // x * sigmoid(x)
Var glu_rows(Var x);         // n×2c -> n×c: first half gated by sigmoid(second)

// Depthwise 1-D convolution along rows with zero same-padding.
// x: T×C, w: K×C (K odd), b: 1×C.
Var conv1d_depthwise(Var x, Var w, Var b);

// ---- indexed ----
Var gather_rows(Var table, const std::vector<int>& ids);
// Mean over rows of (logsumexp(row) - row[id]); ids in [0, cols).
Var cross_entropy_mean(Var logits, const std::vector<int>& ids);

}  // namespace csvmasr
