// Copyright 2026 csvmasr authors
// Attention decoder plus both decoding regimes: autoregressive beam search
// over the decoder and non-autoregressive CTC greedy collapse.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <vector>

#include "csvmasr/encoder.hpp"
#include "csvmasr/gradcheck.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

struct DecoderConfig {
  int num_layers = 2;
  int d_model = 32;
  int num_heads = 2;
  int ffn_dim = 64;
  int vocab_size = 0;       // content + blank + sos + eos
  int max_decode_len = 32;  // generated tokens, excluding sos
  int beam_width = 4;

  void validate() const {
    CM_CHECK(num_layers > 0 && d_model > 0 && ffn_dim > 0, "decoder dims");
    CM_CHECK(d_model % num_heads == 0, "decoder: d_model ", d_model,
             " not divisible by num_heads ", num_heads);
    CM_CHECK(vocab_size >= 4, "decoder: vocab_size must be >= 4, got ",
             vocab_size);
    CM_CHECK(max_decode_len > 0 && beam_width > 0, "decoder limits");
  }
};

// Teacher-forcing / stepwise decoder pass: causal self-attention over the
// prefix (which must start with sos), cross-attention over all encoder rows
// including the summary row. Returns one vocab-logit row per prefix position.
Var decoder_forward(Tape& tape, const BoundParams& params,
                    const DecoderConfig& cfg, Var encoder_frames,
                    const std::vector<int>& prefix_with_sos);

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens, no sos; may end with eos
  double log_prob = 0.0;    // accumulated, unnormalized
  bool finished = false;    // eos emitted or max length reached
};

struct DecodeResult {
  std::vector<int> tokens;  // transcript without sos/eos
  double log_prob = 0.0;    // accumulated log-probability of the chosen hyp
  bool no_eos_warning = false;
};

// Log-distribution over the next token given the generated tokens so far
// (sos implied). Lets beam search run against any model or hand-built table.
using StepFn =
    std::function<std::vector<double>(const std::vector<int>& generated)>;

struct BeamConfig {
  int vocab_size = 0;
  int sos_id = 0;
  int eos_id = 0;
  int blank_id = -1;  // excluded from candidates when >= 0
  int max_len = 32;
  int width = 4;
  bool length_normalize = true;
};

// Width-1 beam search equals greedy argmax decoding. Final selection is by
// length-normalized score (unless disabled); ties break toward shorter, then
// lexicographically smaller token sequences. If no hypothesis emitted eos
// within max_len, the best unfinished one is returned with a warning flag.
DecodeResult beam_search(const StepFn& step, const BeamConfig& cfg);

// Per-frame argmax, collapse consecutive repeats, remove blanks.
std::vector<int> ctc_greedy(const Tensor& log_probs, int blank_id);

}  // namespace csvmasr
