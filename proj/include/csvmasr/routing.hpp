// Copyright 2026 csvmasr authors
// Language-ID masks, weighted-interpolation routing (uniform, framewise,
// summary-vector), adapter experts with the residual combination
// h = h0 + sum_i alpha_i * h_i, and the LIDConcat input augmentation.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csvmasr/ops.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

enum class RoutingVariant { Baseline, LidConcat, Uniform, Framewise, SummaryVector };

const char* variant_name(RoutingVariant v);
RoutingVariant variant_from_name(const std::string& name);
inline bool variant_has_adapters(RoutingVariant v) {
  return v == RoutingVariant::Uniform || v == RoutingVariant::Framewise ||
         v == RoutingVariant::SummaryVector;
}
inline bool variant_has_classifier(RoutingVariant v) {
  return v == RoutingVariant::Framewise || v == RoutingVariant::SummaryVector;
}

// Binary presence vector over the L languages; the prompting interface.
struct LidMask {
  std::vector<uint8_t> m;

  LidMask() = default;
  explicit LidMask(std::vector<uint8_t> bits) : m(std::move(bits)) {}

  static LidMask one_hot(int num_languages, int language);
  static LidMask all_hot(int num_languages);
  static LidMask from_string(const std::string& bits);  // e.g. "101"

  int size() const { return static_cast<int>(m.size()); }
  int popcount() const;
  bool active(int i) const { return m[i] != 0; }
  void validate() const;
  std::string str() const;
};

// Utterance-level uniform weights alpha_i = m_i / popcount(m).
std::vector<double> uniform_alpha(const LidMask& mask);

// Appends the mask bits to every frame: T x d_feat -> T x (d_feat + L).
Tensor lidconcat_augment(const Tensor& features, const LidMask& mask);

// Adapter expert: up(swish(down(h))). No internal residual; the residual is
// supplied by the combination below.
Var adapter_forward(Var h, Var w_down, Var b_down, Var w_up, Var b_up);

// h = h0 + sum over listed experts of alpha_i * h_i. Only active experts are
// listed, so inactive languages are structurally absent from the graph (the
// basis of the prompting isolation guarantee). `alpha` is 1 x L for
// utterance-level weights or rows x L for framewise weights.
struct ActiveExpert {
  int language = 0;
  Var output;
};
Var combine(Var h0, const std::vector<ActiveExpert>& experts, Var alpha,
            bool framewise);

struct ClassifierRef {
  Var w;  // d_model x L
  Var b;  // 1 x L
};

struct RouteResult {
  Var alpha;        // 1 x L (utterance-level) or rows x L (framewise)
  Var lang_logits;  // unmasked classifier logits; invalid for Uniform
  bool framewise = false;
};

// Routing weights for one adapter layer. Uniform ignores the classifier;
// SummaryVector classifies sv_state; Framewise classifies every frame row of
// h0 (the summary row included).
RouteResult route(Tape& tape, Var h0_frames, Var sv_state, const LidMask& mask,
                  RoutingVariant variant,
                  const std::optional<ClassifierRef>& classifier);

}  // namespace csvmasr
