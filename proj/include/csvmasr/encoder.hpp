// Copyright 2026 csvmasr authors
// Micro-Conformer encoder. A learnable summary vector is appended after the
// input projection; it bypasses every convolution (identity at its row,
// bitwise) while taking part in all attention. Adapter layers hook in after
// the second macaron feed-forward, before the layer's final norm.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <vector>

#include "csvmasr/gradcheck.hpp"
#include "csvmasr/routing.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

struct EncoderConfig {
  int num_layers = 6;
  int d_model = 32;
  int num_heads = 2;
  int ffn_dim = 64;
  int conv_kernel = 7;
  std::vector<int> adapter_layers = {2, 4};  // 1-based, strictly increasing
  int rel_pos_clip = 32;

  void validate() const;
  bool is_adapter_layer(int layer_1based) const;
  int head_dim() const { return d_model / num_heads; }
  // Signed clipped distances plus one reserved bucket for summary-row pairs.
  int num_rel_buckets() const { return 2 * rel_pos_clip + 2; }
};

// Bucket of the (query q, key k) pair for sequences with the summary vector
// at row `sv_row`. Bucket 0 is reserved for any pair touching the summary
// row; content pairs map their clipped signed distance k - q to 1..2*clip+1.
int rel_pos_bucket(int q, int k, int sv_row, int clip);

// Generic multi-head attention over already-normalized inputs.
// attn_mask: empty (full attention) or q_rows*k_rows 0/1 entries.
// rel_bias: optional (num_buckets x num_heads) table indexed by
// rel_buckets (q_rows*k_rows entries).
struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};
Var multi_head_attention(Var queries, Var keys, int num_heads,
                         const AttentionParams& p,
                         const std::vector<uint8_t>& attn_mask,
                         Var rel_bias_table,
                         const std::vector<int>& rel_buckets);

// Appends the summary vector row: T x d -> (T+1) x d with row T = theta_sv.
Var append_summary(Var features_projected, Var theta_sv);

struct AdapterRecord {
  int layer = 0;            // 1-based encoder layer index
  Var sv_snapshot;          // 1 x d_model, summary row of h0
  Var lang_logits;          // unmasked classifier logits (invalid if none)
  Tensor alpha;             // routing weights actually used
  bool framewise = false;
};

struct EncoderOutput {
  Var frames;                          // (T+1) x d_model
  std::vector<AdapterRecord> adapters;  // one per adapter layer, in order
};

// Hook invoked at each adapter layer with h0; returns the combined h and
// fills the record. Supplied by the model according to the routing variant.
using AdapterHook = std::function<Var(Tape&, Var h0, int layer, AdapterRecord&)>;

// One conformer layer: 0.5*FFN -> MHSA(rel-pos) -> conv (identity at the
// summary row) -> 0.5*FFN producing h0 -> optional adapter hook -> final
// layer norm. `prefix` names the layer's parameters, e.g. "enc.l3.".
Var conformer_layer(Tape& tape, const BoundParams& params,
                    const EncoderConfig& cfg, const std::string& prefix,
                    Var x, const AdapterHook& hook, int layer_1based,
                    std::vector<AdapterRecord>* records);

// Full encoder pass over projected-or-raw features (T x d_feat_in).
EncoderOutput encode_frames(Tape& tape, const BoundParams& params,
                            const EncoderConfig& cfg, Var features,
                            const AdapterHook& hook);

}  // namespace csvmasr
