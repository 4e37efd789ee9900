// Copyright 2026 csvmasr authors
// AVX2 kernels. Compiled with -mavx2 only; guarded so non-x86 builds stay
// empty. No FMA: mul and add stay separate so results match the scalar
// reference bitwise.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

namespace csvmasr::kernels {

namespace {

void add_avx2(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(c + i, _mm256_add_pd(va, vb));
  }
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(c + i, _mm256_sub_pd(va, vb));
  }
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(c + i, _mm256_mul_pd(va, vb));
  }
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy_avx2(double s, const double* x, double* y, int n) {
  __m256d vs = _mm256_set1_pd(s);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d p = _mm256_mul_pd(vs, vx);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, p));
  }
  for (; i < n; ++i) {
    double p = s * x[i];
    y[i] = y[i] + p;
  }
}

void scale_avx2(double s, const double* x, double* y, int n) {
  __m256d vs = _mm256_set1_pd(s);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_mul_pd(vs, vx));
  }
  for (; i < n; ++i) y[i] = s * x[i];
}

void madd_avx2(const double* a, const double* b, double* c, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(c + i), p));
  }
  for (; i < n; ++i) {
    double p = a[i] * b[i];
    c[i] = c[i] + p;
  }
}

void matmul_acc_avx2(const double* a, const double* b, double* c, int m,
                     int k, int n) {
  // Same i-k-j order as the scalar reference, including the exact-zero skip.
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<long>(i) * n;
    const double* arow = a + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      double s = arow[p];
      if (s == 0.0) continue;
      axpy_avx2(s, b + static_cast<long>(p) * n, crow, n);
    }
  }
}

}  // namespace

const Ops* avx2_ops_impl() {
  static const Ops ops = {
      "avx2",     add_avx2,   sub_avx2,
      mul_avx2,   axpy_avx2,  scale_avx2,
      madd_avx2,  matmul_acc_avx2,
  };
  return &ops;
}

}  // namespace csvmasr::kernels

#else

namespace csvmasr::kernels {
const Ops* avx2_ops_impl() { return nullptr; }
}  // namespace csvmasr::kernels

#endif
