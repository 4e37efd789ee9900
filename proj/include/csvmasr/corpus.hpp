// Copyright 2026 csvmasr authors
// Deterministic synthetic multilingual corpus. Languages are separable by
// an additive per-channel bias and by disjoint token inventories, so both
// acoustic and lexical language identity are learnable at desk scale.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csvmasr/rng.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

struct CorpusConfig {
  int num_languages = 3;
  int tokens_per_language = 10;
  int d_feat = 16;
  int frames_per_token = 3;
  double noise_sigma = 0.1;
  int transcript_len_min = 3;
  int transcript_len_max = 10;
  int train_per_language = 200;
  int val_per_language = 40;
  int test_per_language = 40;
  uint64_t seed = 0;

  void validate() const;

  int content_vocab_size() const { return num_languages * tokens_per_language; }
  // Reserved ids appended after the content tokens.
  int blank_id() const { return content_vocab_size(); }
  int sos_id() const { return content_vocab_size() + 1; }
  int eos_id() const { return content_vocab_size() + 2; }
  int vocab_size() const { return content_vocab_size() + 3; }
};

struct LanguageSpec {
  int language_id = 0;
  int token_lo = 0;  // global ids [token_lo, token_hi) belong to this language
  int token_hi = 0;
  std::vector<double> channel_bias;       // d_feat
  std::vector<double> token_prototypes;   // V * k * d_feat, row-major

  int tokens() const { return token_hi - token_lo; }
  const double* prototype(int local_token, int k, int d_feat) const {
    return token_prototypes.data() +
           (static_cast<int64_t>(local_token) * k) * d_feat;
  }
};

struct Utterance {
  std::vector<double> features;  // T * d_feat, row-major
  int num_frames = 0;
  int d_feat = 0;
  std::vector<int> transcript;   // global token ids
  int language_id = 0;
  std::string utterance_id;

  Tensor feature_tensor() const {
    return Tensor(Shape{num_frames, d_feat}, features);
  }
};

struct Corpus {
  CorpusConfig config;
  std::vector<Utterance> train;
  std::vector<Utterance> val;
  std::vector<Utterance> test;

  const std::vector<Utterance>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw Error("unknown split: " + name);
  }
};

std::vector<LanguageSpec> build_language_specs(const CorpusConfig& config);

// Features = concatenated token prototypes + channel bias + N(0, sigma).
// Tokens outside the spec's inventory are rejected.
Utterance synthesize_utterance(const LanguageSpec& spec,
                               const std::vector<int>& transcript,
                               const CorpusConfig& config, Rng& rng,
                               std::string utterance_id);

Corpus generate_corpus(const CorpusConfig& config);

// JSON-lines: header line carrying the config and vocabulary map, then one
// utterance per line. Byte-identical output for identical config + seed.
void save_corpus_jsonl(const Corpus& corpus, const std::string& path);
Corpus load_corpus_jsonl(const std::string& path);

std::string corpus_to_jsonl(const Corpus& corpus);

}  // namespace csvmasr
