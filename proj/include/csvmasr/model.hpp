// Copyright 2026 csvmasr authors
// Full model: encoder + routing variant + CTC head + attention decoder,
// parameter initialization, loss graph construction and inference.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "csvmasr/encoder.hpp"
#include "csvmasr/losses.hpp"
#include "csvmasr/routing.hpp"
#include "csvmasr/seq2seq.hpp"

namespace csvmasr {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;  // vocab_size derived from content_vocab below
  LossConfig loss;
  RoutingVariant variant = RoutingVariant::SummaryVector;
  int num_languages = 3;
  int d_feat = 16;
  int content_vocab = 30;
  int adapter_rank = 8;

  int blank_id() const { return content_vocab; }
  int sos_id() const { return content_vocab + 1; }
  int eos_id() const { return content_vocab + 2; }
  int vocab_size() const { return content_vocab + 3; }
  // LIDConcat consumes d_feat + L input columns.
  int encoder_input_dim() const {
    return variant == RoutingVariant::LidConcat ? d_feat + num_languages
                                                : d_feat;
  }
  void validate() const;

  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& json);
};

// Per-adapter-layer inference record with concrete values.
struct AdapterInfo {
  int layer = 0;
  Tensor sv_snapshot;   // 1 x d_model
  Tensor lang_logits;   // 1 x L or (T+1) x L; empty when no classifier
  Tensor alpha;         // routing weights used
  bool framewise = false;
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  // Deterministic parameter initialization from a seed.
  void init_params(uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  void set_beam_width(int width) {
    CM_CHECK(width >= 1, "beam width must be >= 1");
    cfg_.decoder.beam_width = width;
  }

  // ---- graph builders (shared by training and inference) ----
  EncoderOutput build_encoder(Tape& tape, const BoundParams& bound,
                              const Tensor& features,
                              const LidMask& mask) const;
  Var build_ctc_log_probs(const BoundParams& bound, Var frames) const;
  TotalLoss build_loss(Tape& tape, const BoundParams& bound,
                       const Tensor& features,
                       const std::vector<int>& transcript, int language_id,
                       const LidMask& mask) const;

  // Scalar program computing the total loss of one utterance; plugs into
  // value_and_grad / finite_diff_grad directly.
  Program loss_program(Tensor features, std::vector<int> transcript,
                       int language_id, LidMask mask) const;

  // ---- inference ----
  struct Inference {
    Tensor frames;         // (T+1) x d_model
    Tensor ctc_log_probs;  // (T+1) x vocab
    std::vector<AdapterInfo> adapters;
  };
  Inference infer_encoder(const Tensor& features, const LidMask& mask) const;
  std::vector<int> decode_nar(const Tensor& features,
                              const LidMask& mask) const;
  DecodeResult decode_ar(const Tensor& features, const LidMask& mask,
                         int beam_width = -1) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

// Full-model gradient oracle: a micro model (d_model=8, 2 encoder layers,
// one adapter layer at layer 2, L=3, 1 decoder layer, T=6) with randomized
// parameters, checking the analytic gradient of the total loss for every
// trainable parameter against central finite differences.
struct ModelGradCheck {
  double max_rel_err = 0.0;
  int num_params = 0;
  double seconds = 0.0;
};
ModelGradCheck run_model_gradcheck(uint64_t seed, double epsilon = 1e-4);

}  // namespace csvmasr
