// Copyright 2026 csvmasr authors
// Data-parallel inner-loop kernels: scalar reference implementations plus
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected at runtime.
//
// All variants are written to be bitwise-equivalent to the scalar reference:
// element-wise kernels apply the same IEEE-754 operations per element, and
// matmul_acc uses the same i-k-j accumulation order in every variant (the
// vector lanes carry independent j indices, so no reassociation happens).
// Multiply-add pairs are kept unfused; the build disables fp contraction.
//
// Licensed under the Apache License, Version 2.0

#pragma once

namespace csvmasr::kernels {

struct Ops {
  const char* name;
  // c[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* c, int n);
  // c[i] = a[i] - b[i]
  void (*sub)(const double* a, const double* b, double* c, int n);
  // c[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* c, int n);
  // y[i] += s * x[i]   (unfused: round(y + round(s*x)))
  void (*axpy)(double s, const double* x, double* y, int n);
  // y[i] = s * x[i]
  void (*scale)(double s, const double* x, double* y, int n);
  // c[i] += a[i] * b[i]   (unfused)
  void (*madd)(const double* a, const double* b, double* c, int n);
  // C[m x n] += A[m x k] * B[k x n], row-major, i-k-j loop order
  void (*matmul_acc)(const double* a, const double* b, double* c, int m,
                     int k, int n);
};

// Reference implementation; always available.
const Ops& scalar_ops();

// SIMD variant for this build/CPU, or nullptr when unsupported.
const Ops* simd_ops();

// Kernels in use. Picks the best supported variant on first call; the
// CSVMASR_KERNELS environment variable ("scalar", "avx2", "neon", "auto")
// overrides the choice. Selection happens once and is then immutable.
const Ops& active();

}  // namespace csvmasr::kernels
