// Copyright 2026 csvmasr authors
// Evaluation: WER against the recursive edit-distance oracle, prompt
// construction, sweep mechanics, language prediction, and report writers.
//
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "csvmasr/eval.hpp"
#include "csvmasr/trainer.hpp"

using namespace csvmasr;

namespace {

// Test-only oracle: the recursive definition of edit distance, memoized.
int edit_distance_recursive(const std::vector<int>& a,
                            const std::vector<int>& b) {
  std::map<std::pair<size_t, size_t>, int> memo;
  std::function<int(size_t, size_t)> rec = [&](size_t i, size_t j) -> int {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int sub = rec(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    int del = rec(i - 1, j) + 1;
    int ins = rec(i, j - 1) + 1;
    int best = std::min({sub, del, ins});
    memo[key] = best;
    return best;
  };
  return rec(a.size(), b.size());
}

CorpusConfig tiny_corpus_config() {
  CorpusConfig c;
  c.num_languages = 3;
  c.tokens_per_language = 3;
  c.d_feat = 4;
  c.frames_per_token = 2;
  c.transcript_len_min = 2;
  c.transcript_len_max = 3;
  c.train_per_language = 4;
  c.val_per_language = 2;
  c.test_per_language = 3;
  c.seed = 5;
  return c;
}

Model tiny_model(const CorpusConfig& c, RoutingVariant variant,
                 uint64_t seed = 3) {
  ModelConfig m;
  m.encoder.num_layers = 2;
  m.encoder.d_model = 8;
  m.encoder.num_heads = 2;
  m.encoder.ffn_dim = 12;
  m.encoder.conv_kernel = 3;
  m.encoder.adapter_layers = {1, 2};
  m.encoder.rel_pos_clip = 4;
  m.decoder.num_layers = 1;
  m.decoder.ffn_dim = 12;
  m.decoder.max_decode_len = 6;
  m.variant = variant;
  m.num_languages = c.num_languages;
  m.d_feat = c.d_feat;
  m.content_vocab = c.content_vocab_size();
  m.adapter_rank = 4;
  Model model(m);
  model.init_params(seed);
  return model;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("wer: worked examples") {
  CHECK(wer_percent({{1, 2, 3}}, {{1, 2, 3}}) == 0.0);
  CHECK(wer_percent({{1, 2, 3}}, {{1, 9, 3}}) ==
        doctest::Approx(33.3333).epsilon(1e-4));
  CHECK(wer_percent({{1, 2, 3}}, {{1, 3}}) ==
        doctest::Approx(33.3333).epsilon(1e-4));
  CHECK_THROWS_AS(wer_percent({}, {}), Error);
}

TEST_CASE("aggregate WER is edit-total over token-total, not a mean of rates") {
  // lang A: 10 tokens 0 errors; lang B: 2 tokens 2 errors
  std::vector<std::vector<int>> refs = {
      {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {2, 2}};
  std::vector<std::vector<int>> hyps = {refs[0], {3, 3}};
  CHECK(wer_percent(refs, hyps) ==
        doctest::Approx(100.0 * 2 / 12).epsilon(1e-12));
}

TEST_CASE("edit distance agrees with the recursive oracle on short pairs") {
  // all pairs of length <= 4 over a 3-symbol alphabet
  std::vector<std::vector<int>> seqs = {{}};
  for (int len = 1; len <= 4; ++len) {
    size_t before = seqs.size();
    for (size_t i = 0; i < before; ++i) {
      if (static_cast<int>(seqs[i].size()) != len - 1) continue;
      for (int s = 0; s < 3; ++s) {
        auto next = seqs[i];
        next.push_back(s);
        seqs.push_back(next);
      }
    }
  }
  for (const auto& a : seqs)
    for (const auto& b : seqs)
      CHECK(edit_distance(a, b) == edit_distance_recursive(a, b));
}

TEST_CASE("make_prompt: 1hot, allhot, explicit mask, errors") {
  CorpusConfig c = tiny_corpus_config();
  Corpus corpus = generate_corpus(c);
  const Utterance& u = corpus.test[4];
  auto p1 = make_prompt("1hot", 3);
  CHECK(p1(u).m == LidMask::one_hot(3, u.language_id).m);
  auto pa = make_prompt("allhot", 3);
  CHECK(pa(u).m == std::vector<uint8_t>{1, 1, 1});
  auto pm = make_prompt("mask=101", 3);
  CHECK(pm(u).m == std::vector<uint8_t>{1, 0, 1});
  CHECK_THROWS_AS(make_prompt("mask=10", 3), Error);
  CHECK_THROWS_AS(make_prompt("2hot", 3), Error);
}

TEST_CASE("evaluate_wer emits per-language rows plus a consistent aggregate") {
  CorpusConfig c = tiny_corpus_config();
  Corpus corpus = generate_corpus(c);
  Model model = tiny_model(c, RoutingVariant::SummaryVector);
  auto rows = evaluate_wer(model, corpus.test, make_prompt("1hot", 3), "1hot",
                           DecodeMode::NAR, 1);
  REQUIRE(rows.size() == 4);  // l0, l1, l2, all
  CHECK(rows[0].language == "l0");
  CHECK(rows[3].language == "all");
  CHECK(rows[3].variant == "csv");
  CHECK(rows[3].decode_mode == "nar");
  for (const auto& r : rows) CHECK(r.wer >= 0.0);
}

TEST_CASE("predict_language: utterance-level argmax and framewise majority") {
  AdapterInfo utt;
  utt.framewise = false;
  utt.lang_logits = Tensor(Shape{1, 3}, {0.1, 2.0, -1.0});
  CHECK(predict_language(utt) == 1);

  AdapterInfo fw;
  fw.framewise = true;
  fw.lang_logits = Tensor(Shape{4, 3}, {5, 0, 0,   // -> 0
                                        0, 5, 0,   // -> 1
                                        0, 5, 0,   // -> 1
                                        0, 0, 5});  // -> 2
  CHECK(predict_language(fw) == 1);

  // tie: two votes each for 0 and 1 -> smaller id
  AdapterInfo tie;
  tie.framewise = true;
  tie.lang_logits = Tensor(Shape{4, 2}, {5, 0, 0, 5, 5, 0, 0, 5});
  CHECK(predict_language(tie) == 0);

  AdapterInfo none;
  CHECK_THROWS_AS(predict_language(none), Error);
}

TEST_CASE("layer_classification_accuracy: shape of the report and bounds") {
  CorpusConfig c = tiny_corpus_config();
  Corpus corpus = generate_corpus(c);
  Model model = tiny_model(c, RoutingVariant::SummaryVector);
  auto rows = layer_classification_accuracy(model, corpus.test,
                                            make_prompt("allhot", 3), 1);
  // 2 adapter layers x (3 languages + aggregate)
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].layer == 1);
  CHECK(rows[4].layer == 2);
  std::map<int, std::map<std::string, double>> by_layer;
  for (const auto& r : rows) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 100.0);
    by_layer[r.layer][r.language] = r.accuracy;
  }
  // aggregate = mean weighted by per-language counts (equal here)
  for (auto& [layer, acc] : by_layer) {
    double mean = (acc["l0"] + acc["l1"] + acc["l2"]) / 3.0;
    CHECK(acc["all"] == doctest::Approx(mean).epsilon(1e-9));
  }

  Model uniform = tiny_model(c, RoutingVariant::Uniform);
  CHECK_THROWS_AS(layer_classification_accuracy(uniform, corpus.test,
                                                make_prompt("allhot", 3), 1),
                  Error);
}

TEST_CASE("prompt_sweep: mask counts, k=0 equals 1-hot exactly") {
  CorpusConfig c = tiny_corpus_config();
  Corpus corpus = generate_corpus(c);
  Model model = tiny_model(c, RoutingVariant::SummaryVector);
  std::vector<Utterance> l1;
  for (const auto& u : corpus.test)
    if (u.language_id == 1) l1.push_back(u);

  SweepResult sweep = prompt_sweep(model, l1, 1, DecodeMode::NAR, 1);
  REQUIRE(sweep.rows.size() == 3);
  CHECK(sweep.rows[0].num_masks == 1);  // C(2,0)
  CHECK(sweep.rows[1].num_masks == 2);  // C(2,1)
  CHECK(sweep.rows[2].num_masks == 1);  // C(2,2)
  CHECK(sweep.rows[0].ci95 == 0.0);
  CHECK(sweep.rows[2].ci95 == 0.0);

  auto rows = evaluate_wer(model, l1, make_prompt("1hot", 3), "1hot",
                           DecodeMode::NAR, 1);
  CHECK(sweep.rows[0].mean_wer == rows.back().wer);  // bitwise equal

  // Per-mask breakdown: the k=1 slice is the 2-hot per-added-language view.
  REQUIRE(sweep.mask_wers.size() == 4);  // 2^(L-1) masks overall
  CHECK(sweep.mask_wers[0].mask == "010");
  int k1 = 0;
  for (const auto& mw : sweep.mask_wers) {
    CHECK(mw.mask[1] == '1');  // ground truth always prompted
    if (mw.k == 1) ++k1;
  }
  CHECK(k1 == 2);
}

TEST_CASE("sweep on a routing-dead model is mask-invariant") {
  CorpusConfig c = tiny_corpus_config();
  Corpus corpus = generate_corpus(c);
  Model model = tiny_model(c, RoutingVariant::SummaryVector);
  // Kill routing: zero every adapter up-projection and classifier.
  for (size_t i = 0; i < model.params().size(); ++i) {
    auto& e = model.params().entry(i);
    if (e.name.find("adapter") != std::string::npos ||
        e.name.find("cls.") != std::string::npos)
      for (auto& v : e.tensor.values) v = 0.0;
  }
  std::vector<Utterance> l0;
  for (const auto& u : corpus.test)
    if (u.language_id == 0) l0.push_back(u);
  SweepResult sweep = prompt_sweep(model, l0, 0, DecodeMode::NAR, 1);
  for (const auto& row : sweep.rows) {
    CHECK(row.mean_wer == sweep.rows[0].mean_wer);
    CHECK(row.ci95 == 0.0);
  }
}

TEST_CASE("report writers emit the specified headers") {
  std::string dir = "/tmp/csvmasr_test_reports";
  std::filesystem::create_directories(dir);
  write_wer_report_csv({{"csv", "1hot", "nar", "all", 1.25}},
                       dir + "/wer_report.csv");
  CHECK(slurp(dir + "/wer_report.csv")
            .rfind("variant,prompt,decode_mode,language,wer", 0) == 0);
  write_lca_report_csv({{"csv", 2, "l0", 99.5}}, dir + "/lca_report.csv");
  CHECK(slurp(dir + "/lca_report.csv")
            .rfind("variant,layer,language,accuracy", 0) == 0);
  SweepResult sweep;
  sweep.language = 0;
  sweep.mode = DecodeMode::NAR;
  sweep.rows = {{0, 10.0, 0.0, 1}, {1, 11.0, 0.5, 2}, {2, 12.0, 0.0, 1}};
  write_sweep_csv(sweep, "csv", dir + "/sweep.csv");
  CHECK(slurp(dir + "/sweep.csv").rfind("variant,language,k,mean_wer,ci95", 0) ==
        0);
  write_sweep_svg(sweep, "csv", dir + "/sweep.svg");
  std::string svg = slurp(dir + "/sweep.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  std::filesystem::remove_all(dir);
}
