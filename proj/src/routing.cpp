// Copyright 2026 csvmasr authors
// Routing implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/routing.hpp"

namespace csvmasr {

const char* variant_name(RoutingVariant v) {
  switch (v) {
    case RoutingVariant::Baseline: return "baseline";
    case RoutingVariant::LidConcat: return "lidconcat";
    case RoutingVariant::Uniform: return "uniform";
    case RoutingVariant::Framewise: return "framewise";
    case RoutingVariant::SummaryVector: return "csv";
  }
  throw Error("unreachable variant");
}

RoutingVariant variant_from_name(const std::string& name) {
  if (name == "baseline") return RoutingVariant::Baseline;
  if (name == "lidconcat") return RoutingVariant::LidConcat;
  if (name == "uniform") return RoutingVariant::Uniform;
  if (name == "framewise") return RoutingVariant::Framewise;
  if (name == "csv") return RoutingVariant::SummaryVector;
  throw Error("unknown variant: " + name +
              " (expected baseline|lidconcat|uniform|framewise|csv)");
}

LidMask LidMask::one_hot(int num_languages, int language) {
  CM_CHECK(0 <= language && language < num_languages, "one_hot: language ",
           language, " out of range [0, ", num_languages, ")");
  std::vector<uint8_t> bits(num_languages, 0);
  bits[language] = 1;
  return LidMask(std::move(bits));
}

LidMask LidMask::all_hot(int num_languages) {
  CM_CHECK(num_languages > 0, "all_hot: no languages");
  return LidMask(std::vector<uint8_t>(num_languages, 1));
}

LidMask LidMask::from_string(const std::string& bits) {
  std::vector<uint8_t> m;
  m.reserve(bits.size());
  for (char c : bits) {
    CM_CHECK(c == '0' || c == '1', "mask string must be 0/1 bits, got '", bits,
             "'");
    m.push_back(c == '1' ? 1 : 0);
  }
  LidMask mask(std::move(m));
  mask.validate();
  return mask;
}

int LidMask::popcount() const {
  int n = 0;
  for (uint8_t b : m) n += (b != 0);
  return n;
}

void LidMask::validate() const {
  CM_CHECK(!m.empty(), "LID mask is empty");
  CM_CHECK(popcount() >= 1, "LID mask must have at least one active language");
}

std::string LidMask::str() const {
  std::string s;
  s.reserve(m.size());
  for (uint8_t b : m) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<double> uniform_alpha(const LidMask& mask) {
  mask.validate();
  double inv = 1.0 / mask.popcount();
  std::vector<double> alpha(mask.size(), 0.0);
  for (int i = 0; i < mask.size(); ++i)
    if (mask.active(i)) alpha[i] = inv;
  return alpha;
}

Tensor lidconcat_augment(const Tensor& features, const LidMask& mask) {
  mask.validate();
  const int T = features.shape.rows;
  const int d = features.shape.cols;
  const int L = mask.size();
  Tensor out = Tensor::zeros(Shape{T, d + L});
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < d; ++c) out.at(t, c) = features.at(t, c);
    for (int i = 0; i < L; ++i)
      out.at(t, d + i) = mask.active(i) ? 1.0 : 0.0;
  }
  return out;
}

Var adapter_forward(Var h, Var w_down, Var b_down, Var w_up, Var b_up) {
  Var down = add_rowvec(matmul(h, w_down), b_down);
  return add_rowvec(matmul(swish(down), w_up), b_up);
}

Var combine(Var h0, const std::vector<ActiveExpert>& experts, Var alpha,
            bool framewise) {
  CM_CHECK(framewise ? alpha.rows() == h0.rows() : alpha.rows() == 1,
           "combine: alpha ", alpha.shape().str(), " granularity vs h0 ",
           h0.shape().str());
  Var h = h0;
  for (const auto& e : experts) {
    CM_CHECK(e.output.shape() == h0.shape(), "combine: expert ", e.language,
             " shape ", e.output.shape().str(), " vs h0 ", h0.shape().str());
    CM_CHECK(0 <= e.language && e.language < alpha.cols(),
             "combine: expert language ", e.language, " vs alpha ",
             alpha.shape().str());
    Var ai = slice_cols(alpha, e.language, e.language + 1);
    Var weighted = framewise ? scale_rows(e.output, ai)
                             : scale_all(e.output, reshape(ai, Shape{1, 1}));
    h = add(h, weighted);
  }
  return h;
}

RouteResult route(Tape& tape, Var h0_frames, Var sv_state, const LidMask& mask,
                  RoutingVariant variant,
                  const std::optional<ClassifierRef>& classifier) {
  mask.validate();
  const int L = mask.size();
  RouteResult r;
  switch (variant) {
    case RoutingVariant::Uniform: {
      r.alpha = tape.constant(Shape{1, L}, uniform_alpha(mask), "uniform_alpha");
      r.framewise = false;
      return r;
    }
    case RoutingVariant::SummaryVector: {
      CM_CHECK(classifier.has_value(),
               "route: summary-vector variant requires a classifier");
      Var logits = add_rowvec(matmul(sv_state, classifier->w), classifier->b);
      r.lang_logits = logits;
      r.alpha = masked_softmax(logits, mask.m);
      r.framewise = false;
      return r;
    }
    case RoutingVariant::Framewise: {
      CM_CHECK(classifier.has_value(),
               "route: framewise variant requires a classifier");
      Var logits = add_rowvec(matmul(h0_frames, classifier->w), classifier->b);
      r.lang_logits = logits;
      r.alpha = masked_softmax(logits, mask.m);  // mask broadcast per row
      r.framewise = true;
      return r;
    }
    default:
      throw Error("route: variant has no routing weights");
  }
}

}  // namespace csvmasr
