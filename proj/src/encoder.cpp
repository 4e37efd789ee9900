// Copyright 2026 csvmasr authors
// Conformer encoder implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace csvmasr {

void EncoderConfig::validate() const {
  CM_CHECK(num_layers > 0, "encoder: num_layers must be positive");
  CM_CHECK(d_model > 0 && num_heads > 0 && d_model % num_heads == 0,
           "encoder: d_model ", d_model, " not divisible by num_heads ",
           num_heads);
  CM_CHECK(ffn_dim > 0, "encoder: ffn_dim must be positive");
  CM_CHECK(conv_kernel > 0 && conv_kernel % 2 == 1,
           "encoder: conv_kernel must be odd, got ", conv_kernel);
  CM_CHECK(rel_pos_clip > 0, "encoder: rel_pos_clip must be positive");
  int prev = 0;
  for (int layer : adapter_layers) {
    CM_CHECK(layer > prev, "encoder: adapter_layers must be strictly increasing");
    CM_CHECK(1 <= layer && layer <= num_layers, "encoder: adapter layer ",
             layer, " outside 1..", num_layers);
    prev = layer;
  }
}

bool EncoderConfig::is_adapter_layer(int layer_1based) const {
  return std::find(adapter_layers.begin(), adapter_layers.end(),
                   layer_1based) != adapter_layers.end();
}

int rel_pos_bucket(int q, int k, int sv_row, int clip) {
  if (q == sv_row || k == sv_row) return 0;
  int d = k - q;
  d = std::max(-clip, std::min(clip, d));
  return d + clip + 1;
}

Var multi_head_attention(Var queries, Var keys, int num_heads,
                         const AttentionParams& p,
                         const std::vector<uint8_t>& attn_mask,
                         Var rel_bias_table,
                         const std::vector<int>& rel_buckets) {
  const int d_model = queries.cols();
  CM_CHECK(d_model % num_heads == 0, "attention: head split mismatch");
  const int dh = d_model / num_heads;
  const int nq = queries.rows();
  const int nk = keys.rows();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = add_rowvec(matmul(queries, p.wq), p.bq);
  Var k = add_rowvec(matmul(keys, p.wk), p.bk);
  Var v = add_rowvec(matmul(keys, p.wv), p.bv);

  Var bias_rows;  // (nq*nk) x num_heads, gathered once for all heads
  if (rel_bias_table.valid()) {
    CM_CHECK(static_cast<int>(rel_buckets.size()) == nq * nk,
             "attention: bucket table size ", rel_buckets.size(), " vs ",
             nq * nk);
    bias_rows = gather_rows(rel_bias_table, rel_buckets);
  }

  Var ctx;
  for (int h = 0; h < num_heads; ++h) {
    Var qh = slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (bias_rows.valid()) {
      Var bh = reshape(slice_cols(bias_rows, h, h + 1), Shape{nq, nk});
      scores = add(scores, bh);
    }
    Var attn = attn_mask.empty() ? softmax_rows(scores)
                                 : masked_softmax(scores, attn_mask);
    Var ctx_h = matmul(attn, vh);
    ctx = ctx.valid() ? concat_cols(ctx, ctx_h) : ctx_h;
  }
  return add_rowvec(matmul(ctx, p.wo), p.bo);
}

Var append_summary(Var features_projected, Var theta_sv) {
  CM_CHECK(features_projected.rows() >= 1,
           "append_summary: empty utterance (T = 0)");
  CM_CHECK(theta_sv.rows() == 1 &&
               theta_sv.cols() == features_projected.cols(),
           "append_summary: theta_sv shape ", theta_sv.shape().str());
  return concat_rows(features_projected, theta_sv);
}

namespace {

AttentionParams attn_params(const BoundParams& params, const std::string& p) {
  return AttentionParams{params[p + "wq"], params[p + "bq"], params[p + "wk"],
                         params[p + "bk"], params[p + "wv"], params[p + "bv"],
                         params[p + "wo"], params[p + "bo"]};
}

Var ffn_block(const BoundParams& params, const std::string& p, Var x) {
  Var y = layer_norm(x, params[p + "ln.g"], params[p + "ln.b"]);
  y = swish(add_rowvec(matmul(y, params[p + "w1"]), params[p + "b1"]));
  return add_rowvec(matmul(y, params[p + "w2"]), params[p + "b2"]);
}

// Conv module on the frame rows only; the caller re-attaches the summary
// row untouched, which realizes the bypass bitwise.
Var conv_block(const BoundParams& params, const std::string& p, Var frames) {
  Var y = layer_norm(frames, params[p + "ln.g"], params[p + "ln.b"]);
  y = glu_rows(add_rowvec(matmul(y, params[p + "pw1.w"]), params[p + "pw1.b"]));
  y = conv1d_depthwise(y, params[p + "dw.w"], params[p + "dw.b"]);
  y = swish(layer_norm(y, params[p + "ln2.g"], params[p + "ln2.b"]));
  return add_rowvec(matmul(y, params[p + "pw2.w"]), params[p + "pw2.b"]);
}

}  // namespace

Var conformer_layer(Tape& tape, const BoundParams& params,
                    const EncoderConfig& cfg, const std::string& prefix,
                    Var x, const AdapterHook& hook, int layer_1based,
                    std::vector<AdapterRecord>* records) {
  const int rows = x.rows();      // T + 1, summary at the last row
  const int sv_row = rows - 1;

  // Half-step feed-forward.
  x = add(x, scale(ffn_block(params, prefix + "ffn1.", x), 0.5));

  // Multi-head self-attention with relative position bias.
  {
    Var xn = layer_norm(x, params[prefix + "attn.ln.g"],
                        params[prefix + "attn.ln.b"]);
    std::vector<int> buckets(static_cast<size_t>(rows) * rows);
    for (int qi = 0; qi < rows; ++qi)
      for (int ki = 0; ki < rows; ++ki)
        buckets[static_cast<size_t>(qi) * rows + ki] =
            rel_pos_bucket(qi, ki, sv_row, cfg.rel_pos_clip);
    Var attn = multi_head_attention(xn, xn, cfg.num_heads,
                                    attn_params(params, prefix + "attn."),
                                    {}, params[prefix + "attn.relbias"],
                                    buckets);
    x = add(x, attn);
  }

  // Convolution module; identity at the summary row.
  {
    Var frames = slice_rows(x, 0, sv_row);
    Var sv = slice_rows(x, sv_row, rows);
    Var conv = conv_block(params, prefix + "conv.", frames);
    x = concat_rows(add(frames, conv), sv);
  }

  // Second half-step feed-forward; its output is h0, the adapter input.
  Var h0 = add(x, scale(ffn_block(params, prefix + "ffn2.", x), 0.5));

  Var h = h0;
  if (cfg.is_adapter_layer(layer_1based) && hook) {
    AdapterRecord record;
    record.layer = layer_1based;
    record.sv_snapshot = row(h0, sv_row);
    h = hook(tape, h0, layer_1based, record);
    if (records != nullptr) records->push_back(std::move(record));
  }

  return layer_norm(h, params[prefix + "final_ln.g"],
                    params[prefix + "final_ln.b"]);
}

EncoderOutput encode_frames(Tape& tape, const BoundParams& params,
                            const EncoderConfig& cfg, Var features,
                            const AdapterHook& hook) {
  cfg.validate();
  Var x = add_rowvec(matmul(features, params["enc.in_proj.w"]),
                     params["enc.in_proj.b"]);
  x = append_summary(x, params["enc.sv"]);
  EncoderOutput out;
  for (int layer = 1; layer <= cfg.num_layers; ++layer) {
    std::string prefix = "enc.l" + std::to_string(layer) + ".";
    x = conformer_layer(tape, params, cfg, prefix, x, hook, layer,
                        &out.adapters);
  }
  out.frames = x;
  return out;
}

}  // namespace csvmasr
