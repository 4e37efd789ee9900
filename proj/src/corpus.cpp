// Copyright 2026 csvmasr authors
// Synthetic corpus generation and JSONL serialization.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace csvmasr {

using ordered_json = nlohmann::ordered_json;

namespace {

// Stream-path tags so every utterance gets an order-independent rng stream.
constexpr uint64_t kSpecStream = 0x5350;
constexpr uint64_t kTrainStream = 1;
constexpr uint64_t kValStream = 2;
constexpr uint64_t kTestStream = 3;

}  // namespace

void CorpusConfig::validate() const {
  CM_CHECK(num_languages >= 2, "config: need at least 2 languages, got ",
           num_languages);
  CM_CHECK(tokens_per_language > 0, "config: tokens_per_language must be > 0");
  CM_CHECK(d_feat > 0, "config: d_feat must be > 0");
  CM_CHECK(frames_per_token > 0, "config: frames_per_token must be > 0");
  CM_CHECK(noise_sigma >= 0.0, "config: noise_sigma must be >= 0");
  CM_CHECK(transcript_len_min > 0 && transcript_len_min <= transcript_len_max,
           "config: empty transcript length range [", transcript_len_min, ", ",
           transcript_len_max, "]");
  CM_CHECK(train_per_language > 0 && val_per_language > 0 &&
               test_per_language > 0,
           "config: split sizes must be positive");
}

std::vector<LanguageSpec> build_language_specs(const CorpusConfig& config) {
  config.validate();
  std::vector<LanguageSpec> specs(config.num_languages);
  for (int lang = 0; lang < config.num_languages; ++lang) {
    Rng rng(Rng::derive(config.seed, {kSpecStream, static_cast<uint64_t>(lang)}));
    LanguageSpec& spec = specs[lang];
    spec.language_id = lang;
    spec.token_lo = lang * config.tokens_per_language;
    spec.token_hi = spec.token_lo + config.tokens_per_language;
    spec.channel_bias.resize(config.d_feat);
    for (auto& b : spec.channel_bias) b = rng.gaussian(0.0, 1.0);
    spec.token_prototypes.resize(static_cast<int64_t>(config.tokens_per_language) *
                                 config.frames_per_token * config.d_feat);
    for (auto& p : spec.token_prototypes) p = rng.gaussian(0.0, 1.0);
  }
  // Channel biases are continuous draws; equality would break separability.
  for (int a = 0; a < config.num_languages; ++a)
    for (int b = a + 1; b < config.num_languages; ++b)
      CM_CHECK(specs[a].channel_bias != specs[b].channel_bias,
               "degenerate seed: identical channel biases for languages ", a,
               " and ", b);
  return specs;
}

Utterance synthesize_utterance(const LanguageSpec& spec,
                               const std::vector<int>& transcript,
                               const CorpusConfig& config, Rng& rng,
                               std::string utterance_id) {
  CM_CHECK(!transcript.empty(), "synthesize_utterance: empty transcript");
  for (int tok : transcript)
    CM_CHECK(spec.token_lo <= tok && tok < spec.token_hi,
             "synthesize_utterance: token ", tok, " outside language ",
             spec.language_id, " inventory [", spec.token_lo, ", ",
             spec.token_hi, ")");
  const int k = config.frames_per_token;
  const int d = config.d_feat;
  Utterance utt;
  utt.language_id = spec.language_id;
  utt.transcript = transcript;
  utt.utterance_id = std::move(utterance_id);
  utt.d_feat = d;
  utt.num_frames = static_cast<int>(transcript.size()) * k;
  utt.features.resize(static_cast<int64_t>(utt.num_frames) * d);
  double* out = utt.features.data();
  for (int tok : transcript) {
    const double* proto = spec.prototype(tok - spec.token_lo, k, d);
    for (int f = 0; f < k; ++f) {
      for (int c = 0; c < d; ++c) {
        double noise =
            config.noise_sigma > 0.0 ? rng.gaussian(0.0, config.noise_sigma) : 0.0;
        *out++ = proto[static_cast<int64_t>(f) * d + c] + spec.channel_bias[c] +
                 noise;
      }
    }
  }
  return utt;
}

namespace {

std::vector<Utterance> generate_split(const CorpusConfig& config,
                                      const std::vector<LanguageSpec>& specs,
                                      uint64_t split_tag,
                                      const std::string& split_name,
                                      int per_language) {
  std::vector<Utterance> utts;
  utts.reserve(static_cast<size_t>(per_language) * config.num_languages);
  for (int lang = 0; lang < config.num_languages; ++lang) {
    const LanguageSpec& spec = specs[lang];
    for (int idx = 0; idx < per_language; ++idx) {
      Rng rng(Rng::derive(config.seed, {split_tag, static_cast<uint64_t>(lang),
                                        static_cast<uint64_t>(idx)}));
      int len = static_cast<int>(rng.uniform_int(config.transcript_len_min,
                                                 config.transcript_len_max));
      std::vector<int> transcript(len);
      for (auto& tok : transcript)
        tok = static_cast<int>(rng.uniform_int(spec.token_lo, spec.token_hi - 1));
      std::ostringstream id;
      id << split_name << "-l" << lang << "-" << idx;
      utts.push_back(
          synthesize_utterance(spec, transcript, config, rng, id.str()));
    }
  }
  return utts;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  std::vector<LanguageSpec> specs = build_language_specs(config);
  Corpus corpus;
  corpus.config = config;
  corpus.train = generate_split(config, specs, kTrainStream, "train",
                                config.train_per_language);
  corpus.val =
      generate_split(config, specs, kValStream, "val", config.val_per_language);
  corpus.test = generate_split(config, specs, kTestStream, "test",
                               config.test_per_language);
  return corpus;
}

namespace {

ordered_json config_to_json(const CorpusConfig& c) {
  ordered_json j;
  j["num_languages"] = c.num_languages;
  j["tokens_per_language"] = c.tokens_per_language;
  j["d_feat"] = c.d_feat;
  j["frames_per_token"] = c.frames_per_token;
  j["noise_sigma"] = c.noise_sigma;
  j["transcript_len_min"] = c.transcript_len_min;
  j["transcript_len_max"] = c.transcript_len_max;
  j["train_per_language"] = c.train_per_language;
  j["val_per_language"] = c.val_per_language;
  j["test_per_language"] = c.test_per_language;
  j["seed"] = c.seed;
  return j;
}

CorpusConfig config_from_json(const ordered_json& j) {
  CorpusConfig c;
  c.num_languages = j.at("num_languages").get<int>();
  c.tokens_per_language = j.at("tokens_per_language").get<int>();
  c.d_feat = j.at("d_feat").get<int>();
  c.frames_per_token = j.at("frames_per_token").get<int>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.transcript_len_min = j.at("transcript_len_min").get<int>();
  c.transcript_len_max = j.at("transcript_len_max").get<int>();
  c.train_per_language = j.at("train_per_language").get<int>();
  c.val_per_language = j.at("val_per_language").get<int>();
  c.test_per_language = j.at("test_per_language").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

void append_utterance_line(std::ostream& os, const Utterance& u,
                           const std::string& split) {
  ordered_json j;
  j["utterance_id"] = u.utterance_id;
  j["split"] = split;
  j["language_id"] = u.language_id;
  j["transcript"] = u.transcript;
  ordered_json rows = ordered_json::array();
  for (int t = 0; t < u.num_frames; ++t) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < u.d_feat; ++c)
      row.push_back(u.features[static_cast<int64_t>(t) * u.d_feat + c]);
    rows.push_back(std::move(row));
  }
  j["features"] = std::move(rows);
  os << j.dump() << "\n";
}

}  // namespace

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::ostringstream os;
  ordered_json header;
  header["format"] = "csvmasr-corpus";
  header["version"] = 1;
  header["config"] = config_to_json(corpus.config);
  ordered_json vocab;
  ordered_json tokens = ordered_json::array();
  for (int lang = 0; lang < corpus.config.num_languages; ++lang)
    for (int t = 0; t < corpus.config.tokens_per_language; ++t)
      tokens.push_back("l" + std::to_string(lang) + "t" + std::to_string(t));
  tokens.push_back("<blank>");
  tokens.push_back("<sos>");
  tokens.push_back("<eos>");
  vocab["tokens"] = std::move(tokens);
  vocab["blank_id"] = corpus.config.blank_id();
  vocab["sos_id"] = corpus.config.sos_id();
  vocab["eos_id"] = corpus.config.eos_id();
  header["vocab"] = std::move(vocab);
  os << header.dump() << "\n";
  for (const auto& u : corpus.train) append_utterance_line(os, u, "train");
  for (const auto& u : corpus.val) append_utterance_line(os, u, "val");
  for (const auto& u : corpus.test) append_utterance_line(os, u, "test");
  return os.str();
}

void save_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot open corpus file for writing: ", path);
  f << corpus_to_jsonl(corpus);
  CM_CHECK(f.good(), "write failed: ", path);
}

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot open corpus file: ", path);
  std::string line;
  CM_CHECK(static_cast<bool>(std::getline(f, line)), "empty corpus file: ", path);
  ordered_json header = ordered_json::parse(line);
  CM_CHECK(header.at("format") == "csvmasr-corpus",
           "not a csvmasr corpus file: ", path);
  Corpus corpus;
  corpus.config = config_from_json(header.at("config"));
  corpus.config.validate();
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    Utterance u;
    u.utterance_id = j.at("utterance_id").get<std::string>();
    u.language_id = j.at("language_id").get<int>();
    u.transcript = j.at("transcript").get<std::vector<int>>();
    const auto& rows = j.at("features");
    u.num_frames = static_cast<int>(rows.size());
    u.d_feat = corpus.config.d_feat;
    u.features.reserve(static_cast<int64_t>(u.num_frames) * u.d_feat);
    for (const auto& row : rows) {
      CM_CHECK(static_cast<int>(row.size()) == u.d_feat, "corpus line ",
               line_no, ": feature row width ", row.size(), " != d_feat ",
               u.d_feat);
      for (const auto& v : row) u.features.push_back(v.get<double>());
    }
    const std::string split = j.at("split").get<std::string>();
    if (split == "train")
      corpus.train.push_back(std::move(u));
    else if (split == "val")
      corpus.val.push_back(std::move(u));
    else if (split == "test")
      corpus.test.push_back(std::move(u));
    else
      throw Error("corpus line " + std::to_string(line_no) +
                  ": unknown split " + split);
  }
  return corpus;
}

}  // namespace csvmasr
