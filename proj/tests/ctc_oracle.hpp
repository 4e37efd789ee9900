// Copyright 2026 csvmasr authors
// Test-only CTC oracle: exhaustive enumeration of every length-T frame path,
// collapsing repeats then removing blanks, summing path probabilities
// directly. Independent of the forward-DP implementation it checks.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>
#include <vector>

#include "csvmasr/tensor.hpp"

namespace csvmasr::testing {

inline std::vector<int> collapse_path(const std::vector<int>& path,
                                      int blank_id) {
  std::vector<int> out;
  int prev = -1;
  for (int v : path) {
    if (v != prev && v != blank_id) out.push_back(v);
    prev = v;
  }
  return out;
}

// -log sum over all vocab^T paths whose collapse equals `target`.
// log_probs: T x V rows of log-probabilities.
inline double ctc_loss_by_enumeration(const Tensor& log_probs,
                                      const std::vector<int>& target,
                                      int blank_id) {
  const int T = log_probs.shape.rows;
  const int V = log_probs.shape.cols;
  std::vector<int> path(T, 0);
  double total = 0.0;
  bool any = false;
  while (true) {
    if (collapse_path(path, blank_id) == target) {
      double logp = 0.0;
      for (int t = 0; t < T; ++t) logp += log_probs.at(t, path[t]);
      total += std::exp(logp);
      any = true;
    }
    int pos = T - 1;
    while (pos >= 0 && path[pos] == V - 1) path[pos--] = 0;
    if (pos < 0) break;
    ++path[pos];
  }
  return any ? -std::log(total)
             : std::numeric_limits<double>::infinity();
}

}  // namespace csvmasr::testing
