// Copyright 2026 csvmasr authors
// NEON kernels for aarch64. Two-lane float64x2 with the same operation
// order as the scalar reference.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/kernels.hpp"

#if defined(__ARM_NEON) && defined(__aarch64__)

#include <arm_neon.h>

namespace csvmasr::kernels {

namespace {

void add_neon(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_neon(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_neon(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy_neon(double s, const double* x, double* y, int n) {
  float64x2_t vs = vdupq_n_f64(s);
  int i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vmulq_f64(vs, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), p));
  }
  for (; i < n; ++i) {
    double p = s * x[i];
    y[i] = y[i] + p;
  }
}

void scale_neon(double s, const double* x, double* y, int n) {
  float64x2_t vs = vdupq_n_f64(s);
  int i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vmulq_f64(vs, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = s * x[i];
}

void madd_neon(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    vst1q_f64(c + i, vaddq_f64(vld1q_f64(c + i), p));
  }
  for (; i < n; ++i) {
    double p = a[i] * b[i];
    c[i] = c[i] + p;
  }
}

void matmul_acc_neon(const double* a, const double* b, double* c, int m,
                     int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<long>(i) * n;
    const double* arow = a + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      double s = arow[p];
      if (s == 0.0) continue;
      axpy_neon(s, b + static_cast<long>(p) * n, crow, n);
    }
  }
}

}  // namespace

const Ops* neon_ops_impl() {
  static const Ops ops = {
      "neon",    add_neon,   sub_neon,
      mul_neon,  axpy_neon,  scale_neon,
      madd_neon, matmul_acc_neon,
  };
  return &ops;
}

}  // namespace csvmasr::kernels

#else

namespace csvmasr::kernels {
const Ops* neon_ops_impl() { return nullptr; }
}  // namespace csvmasr::kernels

#endif
