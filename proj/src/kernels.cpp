// Copyright 2026 csvmasr authors
// Runtime kernel selection.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "csvmasr/common.hpp"

namespace csvmasr::kernels {

const Ops* avx2_ops_impl();
const Ops* neon_ops_impl();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Ops* pick() {
  const char* want = std::getenv("CSVMASR_KERNELS");
  if (want != nullptr && std::strcmp(want, "auto") != 0) {
    if (std::strcmp(want, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(want, "avx2") == 0) {
      const Ops* ops = avx2_ops_impl();
      CM_CHECK(ops != nullptr && cpu_has_avx2(),
               "CSVMASR_KERNELS=avx2 but AVX2 is unavailable in this build/CPU");
      return ops;
    }
    if (std::strcmp(want, "neon") == 0) {
      const Ops* ops = neon_ops_impl();
      CM_CHECK(ops != nullptr, "CSVMASR_KERNELS=neon but NEON is unavailable");
      return ops;
    }
    throw Error(std::string("unknown CSVMASR_KERNELS value: ") + want);
  }
  if (const Ops* ops = avx2_ops_impl(); ops != nullptr && cpu_has_avx2())
    return ops;
  if (const Ops* ops = neon_ops_impl(); ops != nullptr) return ops;
  return &scalar_ops();
}

}  // namespace

const Ops* simd_ops() {
  if (const Ops* ops = avx2_ops_impl(); ops != nullptr && cpu_has_avx2())
    return ops;
  return neon_ops_impl();
}

const Ops& active() {
  static const Ops* chosen = pick();
  return *chosen;
}

}  // namespace csvmasr::kernels
