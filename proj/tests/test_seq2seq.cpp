// Copyright 2026 csvmasr authors
// Decoder and decoding: causality, cross-attention stochasticity, beam
// search contracts (width-1 greedy equivalence, width monotonicity,
// enumeration-checked two-step case), and CTC greedy collapse.
//
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "csvmasr/model.hpp"

using namespace csvmasr;

namespace {

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.encoder.num_layers = 2;
  cfg.encoder.d_model = 8;
  cfg.encoder.num_heads = 2;
  cfg.encoder.ffn_dim = 12;
  cfg.encoder.conv_kernel = 3;
  cfg.encoder.adapter_layers = {2};
  cfg.encoder.rel_pos_clip = 4;
  cfg.decoder.num_layers = 1;
  cfg.decoder.ffn_dim = 12;
  cfg.decoder.max_decode_len = 6;
  cfg.variant = RoutingVariant::SummaryVector;
  cfg.num_languages = 3;
  cfg.d_feat = 5;
  cfg.content_vocab = 9;
  cfg.adapter_rank = 4;
  return cfg;
}

Model random_model(uint64_t seed) {
  Model model(micro_config());
  model.init_params(seed);
  Rng rng(seed ^ 0xabc);
  for (size_t i = 0; i < model.params().size(); ++i) {
    auto& e = model.params().entry(i);
    bool ln_gain = e.name.size() >= 4 &&
                   e.name.compare(e.name.size() - 4, 4, "ln.g") == 0;
    for (auto& v : e.tensor.values)
      v = ln_gain ? 1.0 + rng.gaussian(0.0, 0.2) : rng.gaussian(0.0, 0.4);
  }
  return model;
}

// Deterministic pseudo-random next-token distribution keyed by the prefix.
StepFn random_step(uint64_t seed, int vocab) {
  return [seed, vocab](const std::vector<int>& generated) {
    uint64_t h = seed;
    for (int tok : generated) h = Rng::derive(h, {static_cast<uint64_t>(tok)});
    Rng rng(h);
    std::vector<double> logits(vocab);
    for (auto& v : logits) v = rng.gaussian(0.0, 2.0);
    // normalize to log-probs
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    double lse = mx + std::log(s);
    for (auto& v : logits) v -= lse;
    return logits;
  };
}

}  // namespace

TEST_CASE("decoder_forward: one logits row per prefix position, causal") {
  Model model = random_model(4);
  Rng rng(9);
  Tensor feats = Tensor::randn(Shape{6, 5}, rng);
  Tape tape;
  BoundParams bound(tape, model.params(), false);
  EncoderOutput enc = model.build_encoder(tape, bound, feats,
                                          LidMask::all_hot(3));
  const auto& cfg = model.config();
  std::vector<int> p1 = {cfg.sos_id(), 0, 3};
  std::vector<int> p2 = {cfg.sos_id(), 0, 3, 7};
  Var l1 = decoder_forward(tape, bound, cfg.decoder, enc.frames, p1);
  Var l2 = decoder_forward(tape, bound, cfg.decoder, enc.frames, p2);
  CHECK(l1.rows() == 3);
  CHECK(l2.rows() == 4);
  // Appending a token leaves earlier rows bitwise unchanged.
  CHECK(std::memcmp(l1.value().data(), l2.value().data(),
                    3 * cfg.vocab_size() * sizeof(double)) == 0);
}

TEST_CASE("decoder_forward rejects empty and over-long prefixes") {
  Model model = random_model(4);
  Rng rng(9);
  Tensor feats = Tensor::randn(Shape{6, 5}, rng);
  Tape tape;
  BoundParams bound(tape, model.params(), false);
  EncoderOutput enc = model.build_encoder(tape, bound, feats,
                                          LidMask::all_hot(3));
  const auto& cfg = model.config();
  CHECK_THROWS_AS(decoder_forward(tape, bound, cfg.decoder, enc.frames, {}),
                  Error);
  std::vector<int> too_long(cfg.decoder.max_decode_len + 2, 0);
  too_long[0] = cfg.sos_id();
  CHECK_THROWS_AS(
      decoder_forward(tape, bound, cfg.decoder, enc.frames, too_long), Error);
}

TEST_CASE("cross-attention rows sum to one over encoder keys") {
  Rng rng(44);
  const int d = 8, heads = 2, nq = 3, nk = 7;
  Tape tape;
  Var q = tape.constant(Shape{nq, d}, Tensor::randn(Shape{nq, d}, rng).values);
  Var kv = tape.constant(Shape{nk, d}, Tensor::randn(Shape{nk, d}, rng).values);
  std::vector<double> eye(d * d, 0.0);
  for (int i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  AttentionParams p;
  p.wq = tape.constant(Shape{d, d}, Tensor::randn(Shape{d, d}, rng, 0.4).values);
  p.bq = tape.constant(Shape{1, d}, std::vector<double>(d, 0.0));
  p.wk = tape.constant(Shape{d, d}, Tensor::randn(Shape{d, d}, rng, 0.4).values);
  p.bk = tape.constant(Shape{1, d}, std::vector<double>(d, 0.0));
  p.wv = tape.constant(Shape{d, d}, std::vector<double>(d * d, 0.0));
  p.bv = tape.constant(Shape{1, d}, std::vector<double>(d, 1.0));
  p.wo = tape.constant(Shape{d, d}, eye);
  p.bo = tape.constant(Shape{1, d}, std::vector<double>(d, 0.0));
  Var out = multi_head_attention(q, kv, heads, p, {}, Var{}, {});
  for (double v : out.value()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beam width 1 equals greedy argmax decoding") {
  const int vocab = 6;
  BeamConfig bc;
  bc.vocab_size = vocab;
  bc.sos_id = 4;
  bc.eos_id = 5;
  bc.blank_id = 3;
  bc.max_len = 5;
  bc.width = 1;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    StepFn step = random_step(seed, vocab);
    DecodeResult beam = beam_search(step, bc);

    // Hand-rolled greedy: argmax over candidates (no sos, no blank).
    std::vector<int> greedy;
    for (int depth = 0; depth < bc.max_len; ++depth) {
      auto logp = step(greedy);
      int arg = -1;
      for (int tok = 0; tok < vocab; ++tok) {
        if (tok == bc.sos_id || tok == bc.blank_id) continue;
        if (arg < 0 || logp[tok] > logp[arg]) arg = tok;
      }
      if (arg == bc.eos_id) break;
      greedy.push_back(arg);
    }
    CHECK(beam.tokens == greedy);
  }
}

TEST_CASE("two-step enumeration: width 2 beats width 1 on a crafted table") {
  // Vocab: 0=a, 1=b, 2=eos, 3=sos. Greedy takes a (0.52) but its
  // continuations are poor; b leads to a near-certain eos.
  const double log_a = std::log(0.52), log_b = std::log(0.44),
               log_e0 = std::log(0.04);
  std::map<std::vector<int>, std::vector<double>> table = {
      {{}, {log_a, log_b, log_e0, -1e9}},
      {{0}, {std::log(0.40), std::log(0.40), std::log(0.20), -1e9}},
      {{1}, {std::log(0.02), std::log(0.02), std::log(0.96), -1e9}},
  };
  StepFn step = [&table](const std::vector<int>& g) {
    auto it = table.find(g);
    if (it != table.end()) return it->second;
    return std::vector<double>{std::log(0.3), std::log(0.3), std::log(0.4),
                               -1e9};
  };
  BeamConfig bc;
  bc.vocab_size = 4;
  bc.sos_id = 3;
  bc.eos_id = 2;
  bc.blank_id = -1;
  bc.max_len = 2;
  bc.length_normalize = false;

  // Exhaustive enumeration over all length-<=2 sequences ending in eos.
  double best_total = -1e18;
  std::vector<int> best_seq;
  for (int t1 = 0; t1 < 3; ++t1) {
    if (t1 == 2) {
      double total = step({})[2];
      if (total > best_total) {
        best_total = total;
        best_seq = {};
      }
      continue;
    }
    auto l2 = step({t1});
    double total = step({})[t1] + l2[2];
    if (total > best_total) {
      best_total = total;
      best_seq = {t1};
    }
  }
  CHECK(best_seq == std::vector<int>{1});

  bc.width = 1;
  DecodeResult w1 = beam_search(step, bc);
  bc.width = 2;
  DecodeResult w2 = beam_search(step, bc);
  CHECK(w2.tokens == best_seq);
  CHECK(w2.log_prob > w1.log_prob);
  CHECK(w2.log_prob == doctest::Approx(best_total).epsilon(1e-12));
}

TEST_CASE("beam total log-probability is non-decreasing in width") {
  const int vocab = 6;
  BeamConfig bc;
  bc.vocab_size = vocab;
  bc.sos_id = 4;
  bc.eos_id = 5;
  bc.blank_id = 3;
  bc.max_len = 5;
  bc.length_normalize = false;
  for (uint64_t seed = 100; seed < 140; ++seed) {
    StepFn step = random_step(seed, vocab);
    double prev = -1e18;
    for (int width = 1; width <= 4; ++width) {
      bc.width = width;
      DecodeResult r = beam_search(step, bc);
      CHECK(r.log_prob >= prev - 1e-12);
      prev = r.log_prob;
    }
  }
}

TEST_CASE("no eos within max_len returns best hypothesis with warning") {
  StepFn step = [](const std::vector<int>&) {
    return std::vector<double>{std::log(0.6), std::log(0.4), -1e9, -1e9};
  };
  BeamConfig bc;
  bc.vocab_size = 4;
  bc.sos_id = 3;
  bc.eos_id = 2;
  bc.blank_id = -1;
  bc.max_len = 3;
  bc.width = 2;
  DecodeResult r = beam_search(step, bc);
  CHECK(r.no_eos_warning);
  CHECK(r.tokens.size() == 3);
}

TEST_CASE("AR decoding is deterministic on a random model") {
  Model model = random_model(21);
  Rng rng(2);
  Tensor feats = Tensor::randn(Shape{9, 5}, rng);
  auto r1 = model.decode_ar(feats, LidMask::all_hot(3));
  auto r2 = model.decode_ar(feats, LidMask::all_hot(3));
  CHECK(r1.tokens == r2.tokens);
  CHECK(r1.log_prob == r2.log_prob);
}

TEST_CASE("ctc_greedy collapse rules") {
  // vocab: 0=blank, 1=a, 2=b; craft argmax paths via one-hot-ish rows
  auto lp = [&](std::vector<int> path, int vocab) {
    Tensor t = Tensor::full(Shape{static_cast<int>(path.size()), vocab}, -5.0);
    for (size_t i = 0; i < path.size(); ++i) t.at(static_cast<int>(i), path[i]) = -0.1;
    return t;
  };
  CHECK(ctc_greedy(lp({0, 1, 1, 0, 2}, 3), 0) == std::vector<int>{1, 2});
  CHECK(ctc_greedy(lp({0, 0, 0}, 3), 0) == std::vector<int>{});
  CHECK(ctc_greedy(lp({1, 0, 1}, 3), 0) == std::vector<int>{1, 1});
}

TEST_CASE("ctc_greedy never emits blanks or adjacent duplicates from runs") {
  Rng rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    int T = static_cast<int>(rng.uniform_int(1, 12));
    int V = static_cast<int>(rng.uniform_int(2, 5));
    Tensor lp = Tensor::randn(Shape{T, V}, rng);
    auto out = ctc_greedy(lp, 0);
    for (size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i] != 0);
      if (i > 0) {
        // adjacent equal tokens may only come from separated runs; verify
        // against a direct recomputation of the argmax path
        CHECK(out[i] >= 1);
      }
    }
    // Recompute path and collapse independently.
    std::vector<int> path(T);
    for (int t = 0; t < T; ++t) {
      int arg = 0;
      for (int v = 1; v < V; ++v)
        if (lp.at(t, v) > lp.at(t, arg)) arg = v;
      path[t] = arg;
    }
    std::vector<int> collapsed;
    for (int t = 0; t < T; ++t)
      if (path[t] != 0 && (t == 0 || path[t] != path[t - 1]))
        collapsed.push_back(path[t]);
    CHECK(out == collapsed);
  }
}
