// Copyright 2026 csvmasr authors
// Scalar reference kernels. These define the semantics every SIMD variant
// must reproduce bitwise.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/kernels.hpp"

namespace csvmasr::kernels {

namespace {

void add_scalar(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy_scalar(double s, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) {
    double p = s * x[i];
    y[i] = y[i] + p;
  }
}

void scale_scalar(double s, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = s * x[i];
}

void madd_scalar(const double* a, const double* b, double* c, int n) {
  for (int i = 0; i < n; ++i) {
    double p = a[i] * b[i];
    c[i] = c[i] + p;
  }
}

void matmul_acc_scalar(const double* a, const double* b, double* c, int m,
                       int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<long>(i) * n;
    const double* arow = a + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      double s = arow[p];
      if (s == 0.0) continue;  // exact-zero rows of A contribute nothing
      axpy_scalar(s, b + static_cast<long>(p) * n, crow, n);
    }
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",      add_scalar,   sub_scalar,
      mul_scalar,    axpy_scalar,  scale_scalar,
      madd_scalar,   matmul_acc_scalar,
  };
  return ops;
}

}  // namespace csvmasr::kernels
