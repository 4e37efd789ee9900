// Copyright 2026 csvmasr authors
// Decoder and decoding implementations.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/seq2seq.hpp"

#include <algorithm>
#include <cmath>

namespace csvmasr {

namespace {

AttentionParams attn_params(const BoundParams& params, const std::string& p) {
  return AttentionParams{params[p + "wq"], params[p + "bq"], params[p + "wk"],
                         params[p + "bk"], params[p + "wv"], params[p + "bv"],
                         params[p + "wo"], params[p + "bo"]};
}

}  // namespace

Var decoder_forward(Tape& tape, const BoundParams& params,
                    const DecoderConfig& cfg, Var encoder_frames,
                    const std::vector<int>& prefix_with_sos) {
  (void)tape;  // nodes attach through the parameter and input vars
  cfg.validate();
  const int n = static_cast<int>(prefix_with_sos.size());
  CM_CHECK(n >= 1, "decoder_forward: empty prefix");
  CM_CHECK(prefix_with_sos[0] == cfg.vocab_size - 2,
           "decoder_forward: prefix must start with sos");
  CM_CHECK(n <= cfg.max_decode_len + 1, "decoder_forward: prefix length ", n,
           " exceeds max_decode_len + 1 = ", cfg.max_decode_len + 1);
  for (int tok : prefix_with_sos)
    CM_CHECK(0 <= tok && tok < cfg.vocab_size, "decoder_forward: token ", tok,
             " outside vocab ", cfg.vocab_size);

  Var x = gather_rows(params["dec.embed"], prefix_with_sos);
  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) positions[i] = i;
  x = add(x, gather_rows(params["dec.pos"], positions));

  std::vector<uint8_t> causal(static_cast<size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) causal[static_cast<size_t>(i) * n + j] = 1;

  Var invalid;
  for (int layer = 1; layer <= cfg.num_layers; ++layer) {
    std::string p = "dec.l" + std::to_string(layer) + ".";
    Var xn = layer_norm(x, params[p + "self.ln.g"], params[p + "self.ln.b"]);
    x = add(x, multi_head_attention(xn, xn, cfg.num_heads,
                                    attn_params(params, p + "self."), causal,
                                    invalid, {}));
    xn = layer_norm(x, params[p + "cross.ln.g"], params[p + "cross.ln.b"]);
    x = add(x, multi_head_attention(xn, encoder_frames, cfg.num_heads,
                                    attn_params(params, p + "cross."), {},
                                    invalid, {}));
    xn = layer_norm(x, params[p + "ffn.ln.g"], params[p + "ffn.ln.b"]);
    Var h = swish(add_rowvec(matmul(xn, params[p + "ffn.w1"]),
                             params[p + "ffn.b1"]));
    x = add(x, add_rowvec(matmul(h, params[p + "ffn.w2"]),
                          params[p + "ffn.b2"]));
  }
  x = layer_norm(x, params["dec.final_ln.g"], params["dec.final_ln.b"]);
  return add_rowvec(matmul(x, params["dec.out.w"]), params["dec.out.b"]);
}

namespace {

// Ordering for final hypothesis selection: higher score first, then shorter
// token sequence, then lexicographically smaller.
bool better_hyp(double score_a, const Hypothesis& a, double score_b,
                const Hypothesis& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.tokens.size() != b.tokens.size())
    return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace

DecodeResult beam_search(const StepFn& step, const BeamConfig& cfg) {
  CM_CHECK(cfg.width >= 1, "beam_search: width must be >= 1, got ", cfg.width);
  CM_CHECK(cfg.vocab_size >= 2, "beam_search: vocab too small");
  CM_CHECK(cfg.max_len >= 1, "beam_search: max_len must be >= 1");

  std::vector<Hypothesis> beams(1);  // starts with the empty prefix
  std::vector<Hypothesis> finished;  // emitted eos

  auto norm_score = [&](const Hypothesis& h) {
    if (!cfg.length_normalize) return h.log_prob;
    size_t len = std::max<size_t>(1, h.tokens.size());
    return h.log_prob / static_cast<double>(len);
  };

  for (int depth = 0; depth < cfg.max_len && !beams.empty(); ++depth) {
    std::vector<Hypothesis> expansions;
    expansions.reserve(beams.size() * cfg.vocab_size);
    for (const Hypothesis& beam : beams) {
      std::vector<double> logp = step(beam.tokens);
      CM_CHECK(static_cast<int>(logp.size()) == cfg.vocab_size,
               "beam_search: step returned ", logp.size(),
               " log-probs for vocab ", cfg.vocab_size);
      for (int tok = 0; tok < cfg.vocab_size; ++tok) {
        if (tok == cfg.sos_id || tok == cfg.blank_id) continue;
        Hypothesis h = beam;
        h.tokens.push_back(tok);
        h.log_prob += logp[tok];
        if (tok == cfg.eos_id || static_cast<int>(h.tokens.size()) == cfg.max_len)
          h.finished = true;
        expansions.push_back(std::move(h));
      }
    }
    // Deterministic order: accumulated log-prob, shorter, lexicographic.
    std::stable_sort(expansions.begin(), expansions.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                       return better_hyp(a.log_prob, a, b.log_prob, b);
                     });
    // Keep the top `width` expansions overall; finished ones retire to the
    // pool. With width 1 this reduces exactly to greedy argmax decoding.
    beams.clear();
    int taken = 0;
    for (const Hypothesis& h : expansions) {
      if (taken == cfg.width) break;
      ++taken;
      if (h.finished) {
        finished.push_back(h);
      } else {
        beams.push_back(h);
      }
    }
  }

  // Finished covers both eos-terminated and length-capped hypotheses; the
  // warning flag reports when the winner never emitted eos.
  const Hypothesis* best = nullptr;
  for (const Hypothesis& h : finished)
    if (best == nullptr ||
        better_hyp(norm_score(h), h, norm_score(*best), *best))
      best = &h;
  CM_CHECK(best != nullptr, "beam_search: no hypothesis produced");

  bool has_eos = !best->tokens.empty() && best->tokens.back() == cfg.eos_id;
  DecodeResult result;
  result.tokens = best->tokens;
  if (has_eos) result.tokens.pop_back();
  result.log_prob = best->log_prob;
  result.no_eos_warning = !has_eos;
  return result;
}

std::vector<int> ctc_greedy(const Tensor& log_probs, int blank_id) {
  const int T = log_probs.shape.rows;
  const int V = log_probs.shape.cols;
  CM_CHECK(0 <= blank_id && blank_id < V, "ctc_greedy: blank ", blank_id,
           " outside vocab ", V);
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < T; ++t) {
    int arg = 0;
    double best = log_probs.at(t, 0);
    for (int v = 1; v < V; ++v) {
      if (log_probs.at(t, v) > best) {
        best = log_probs.at(t, v);
        arg = v;
      }
    }
    if (arg != blank_id && arg != prev) out.push_back(arg);
    prev = arg;
  }
  return out;
}

}  // namespace csvmasr
