// Copyright 2026 csvmasr authors
// Command-line entry point: data generation, training, evaluation, prompt
// sweeps and the gradient-check suite.
//
// Licensed under the Apache License, Version 2.0

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csvmasr/checkpoint.hpp"
#include "csvmasr/corpus.hpp"
#include "csvmasr/eval.hpp"
#include "csvmasr/gradcheck.hpp"
#include "csvmasr/manifest.hpp"
#include "csvmasr/model.hpp"
#include "csvmasr/trainer.hpp"

using namespace csvmasr;
using ordered_json = nlohmann::ordered_json;

namespace {

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("CSVMASR_THREADS"); env != nullptr) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

ordered_json corpus_config_json(const CorpusConfig& c) {
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

struct TrainFlags {
  std::string corpus_path;
  std::string out_dir;
  std::string variant = "csv";
  std::string adapters = "2,4";
  TrainConfig tc;
  int layers = 6, d_model = 32, heads = 2, ffn_dim = 64, conv_kernel = 7;
  int rel_pos_clip = 32, adapter_rank = 8, dec_layers = 2;
  int max_decode_len = 32, beam_width = 4;
  double lambda = 0.5, beta = 0.3;
  int threads_flag = 0;
  bool verbose = false;
};

std::vector<int> parse_adapter_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

int cmd_train(const TrainFlags& f) {
  Corpus corpus = load_corpus_jsonl(f.corpus_path);
  ModelConfig mc;
  mc.encoder.num_layers = f.layers;
  mc.encoder.d_model = f.d_model;
  mc.encoder.num_heads = f.heads;
  mc.encoder.ffn_dim = f.ffn_dim;
  mc.encoder.conv_kernel = f.conv_kernel;
  mc.encoder.adapter_layers = parse_adapter_list(f.adapters);
  mc.encoder.rel_pos_clip = f.rel_pos_clip;
  mc.decoder.num_layers = f.dec_layers;
  mc.decoder.ffn_dim = f.ffn_dim;
  mc.decoder.num_heads = f.heads;
  mc.decoder.max_decode_len = f.max_decode_len;
  mc.decoder.beam_width = f.beam_width;
  mc.loss.lambda = f.lambda;
  mc.loss.beta = f.beta;
  mc.adapter_rank = f.adapter_rank;
  mc.num_languages = corpus.config.num_languages;
  mc.d_feat = corpus.config.d_feat;
  mc.content_vocab = corpus.config.content_vocab_size();

  TrainConfig tc = f.tc;
  tc.variant = variant_from_name(f.variant);
  tc.threads = resolve_threads(f.threads_flag);
  if (!variant_has_adapters(tc.variant)) mc.encoder.adapter_layers.clear();
  mc.variant = tc.variant;
  mc.validate();

  train(corpus, mc, tc, f.out_dir, f.verbose);

  ordered_json manifest;
  manifest["command"] = "train";
  manifest["corpus"] = f.corpus_path;
  manifest["corpus_sha256"] = sha256_file_hex(f.corpus_path);
  manifest["corpus_config"] = corpus_config_json(corpus.config);
  manifest["model_config"] = ordered_json::parse(mc.to_json_string());
  ordered_json t;
  t["p_insert"] = tc.p_insert;
  t["learning_rate"] = tc.learning_rate;
  t["epochs"] = tc.epochs;
  t["batch_size"] = tc.batch_size;
  t["k_average"] = tc.k_average;
  t["seed"] = tc.seed;
  t["variant"] = variant_name(tc.variant);
  t["precision"] = tc.precision;
  t["threads"] = tc.threads;
  manifest["train_config"] = std::move(t);
  write_manifest(f.out_dir, manifest);
  std::printf("train: wrote checkpoints and train_log.csv to %s\n",
              f.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csvMASR: configurable multilingual ASR with summary-vector "
               "adapter routing"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  CorpusConfig cc;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output corpus file (JSON lines)")
      ->required();
  gen->add_option("--seed", cc.seed, "Corpus seed")->capture_default_str();
  gen->add_option("--languages", cc.num_languages, "Number of languages")
      ->capture_default_str();
  gen->add_option("--tokens-per-language", cc.tokens_per_language,
                  "Content tokens per language")
      ->capture_default_str();
  gen->add_option("--d-feat", cc.d_feat, "Feature dimension")
      ->capture_default_str();
  gen->add_option("--frames-per-token", cc.frames_per_token,
                  "Frames per transcript token")
      ->capture_default_str();
  gen->add_option("--noise-sigma", cc.noise_sigma, "Feature noise stddev")
      ->capture_default_str();
  gen->add_option("--len-min", cc.transcript_len_min, "Min transcript length")
      ->capture_default_str();
  gen->add_option("--len-max", cc.transcript_len_max, "Max transcript length")
      ->capture_default_str();
  gen->add_option("--train-per-lang", cc.train_per_language,
                  "Train utterances per language")
      ->capture_default_str();
  gen->add_option("--val-per-lang", cc.val_per_language,
                  "Validation utterances per language")
      ->capture_default_str();
  gen->add_option("--test-per-lang", cc.test_per_language,
                  "Test utterances per language")
      ->capture_default_str();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train a model on a corpus");
  TrainFlags tf;
  tr->add_option("--corpus", tf.corpus_path, "Corpus JSONL file")->required();
  tr->add_option("--out", tf.out_dir, "Output run directory")->required();
  tr->add_option("--variant", tf.variant,
                 "Routing variant: baseline|lidconcat|uniform|framewise|csv")
      ->capture_default_str();
  tr->add_option("--adapters", tf.adapters,
                 "Comma-separated 1-based adapter layer ids")
      ->capture_default_str();
  tr->add_option("--epochs", tf.tc.epochs, "Training epochs")
      ->capture_default_str();
  tr->add_option("--batch-size", tf.tc.batch_size, "Batch size")
      ->capture_default_str();
  tr->add_option("--lr", tf.tc.learning_rate, "Adam learning rate")
      ->capture_default_str();
  tr->add_option("--p-insert", tf.tc.p_insert,
                 "Probability of inserting each incorrect LID during training")
      ->capture_default_str();
  tr->add_option("--k-average", tf.tc.k_average,
                 "Checkpoints averaged over the best K epochs")
      ->capture_default_str();
  tr->add_option("--seed", tf.tc.seed, "Training seed")->capture_default_str();
  tr->add_option("--precision", tf.tc.precision,
                 "Parameter precision: 64, or 32 (rounds parameters to "
                 "float32 after each step)")
      ->capture_default_str();
  tr->add_option("--threads", tf.threads_flag,
                 "Worker threads (default 1; env CSVMASR_THREADS as fallback)");
  tr->add_option("--layers", tf.layers, "Encoder layers")->capture_default_str();
  tr->add_option("--d-model", tf.d_model, "Model width")->capture_default_str();
  tr->add_option("--heads", tf.heads, "Attention heads")->capture_default_str();
  tr->add_option("--ffn-dim", tf.ffn_dim, "Feed-forward width")
      ->capture_default_str();
  tr->add_option("--conv-kernel", tf.conv_kernel, "Depthwise conv kernel (odd)")
      ->capture_default_str();
  tr->add_option("--rel-pos-clip", tf.rel_pos_clip,
                 "Relative position clip distance")
      ->capture_default_str();
  tr->add_option("--adapter-rank", tf.adapter_rank, "Adapter bottleneck width")
      ->capture_default_str();
  tr->add_option("--dec-layers", tf.dec_layers, "Decoder layers")
      ->capture_default_str();
  tr->add_option("--max-decode-len", tf.max_decode_len, "Max decode length")
      ->capture_default_str();
  tr->add_option("--beam-width", tf.beam_width, "Default beam width")
      ->capture_default_str();
  tr->add_option("--lambda", tf.lambda, "Language loss weight lambda")
      ->capture_default_str();
  tr->add_option("--beta", tf.beta, "CTC/attention mix weight beta")
      ->capture_default_str();
  tr->add_flag("--verbose", tf.verbose, "Per-epoch progress on stdout");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
  std::string ev_ckpt, ev_corpus, ev_out, ev_prompt = "1hot",
                                          ev_decode = "both";
  int ev_beam = 0, ev_threads_flag = 0;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--corpus", ev_corpus, "Corpus JSONL file")->required();
  ev->add_option("--out", ev_out, "Output report directory")->required();
  ev->add_option("--prompt", ev_prompt, "Prompt: 1hot | allhot | mask=<bits>")
      ->capture_default_str();
  ev->add_option("--decode", ev_decode, "Decode mode: ar | nar | both")
      ->capture_default_str();
  ev->add_option("--beam-width", ev_beam,
                 "Beam width override (default: checkpoint config)");
  ev->add_option("--threads", ev_threads_flag, "Worker threads");

  // ---- sweep ----
  auto* sw = app.add_subcommand(
      "sweep", "WER vs number of additional prompted LIDs for one language");
  std::string sw_ckpt, sw_corpus, sw_out, sw_decode = "nar";
  int sw_language = 0, sw_threads_flag = 0;
  bool sw_no_svg = false;
  sw->add_option("--ckpt", sw_ckpt, "Checkpoint file")->required();
  sw->add_option("--corpus", sw_corpus, "Corpus JSONL file")->required();
  sw->add_option("--out", sw_out, "Output directory")->required();
  sw->add_option("--language", sw_language, "Ground-truth language id")
      ->required();
  sw->add_option("--decode", sw_decode, "Decode mode: ar | nar")
      ->capture_default_str();
  sw->add_option("--threads", sw_threads_flag, "Worker threads");
  sw->add_flag("--no-svg", sw_no_svg, "Skip the SVG chart");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand(
      "gradcheck", "Finite-difference gradient suite (nonzero exit on failure)");
  uint64_t gc_seed = 20260808;
  int gc_cases = 100;
  gc->add_option("--seed", gc_seed, "Suite seed")->capture_default_str();
  gc->add_option("--cases", gc_cases, "Random cases per primitive op")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      cc.validate();
      Corpus corpus = generate_corpus(cc);
      save_corpus_jsonl(corpus, gen_out);
      std::printf("gen-data: wrote %zu train / %zu val / %zu test utterances "
                  "to %s\n",
                  corpus.train.size(), corpus.val.size(), corpus.test.size(),
                  gen_out.c_str());
      return 0;
    }
    if (tr->parsed()) return cmd_train(tf);
    if (ev->parsed()) {
      Checkpoint ckpt = load_checkpoint(ev_ckpt);
      Model model = ckpt.to_model();
      Corpus corpus = load_corpus_jsonl(ev_corpus);
      int threads = resolve_threads(ev_threads_flag);
      if (ev_beam > 0) model.set_beam_width(ev_beam);
      PromptFn prompt = make_prompt(ev_prompt, model.config().num_languages);

      std::vector<WerRow> rows;
      std::vector<DecodeMode> modes;
      if (ev_decode == "ar" || ev_decode == "both") modes.push_back(DecodeMode::AR);
      if (ev_decode == "nar" || ev_decode == "both")
        modes.push_back(DecodeMode::NAR);
      CM_CHECK(!modes.empty(), "eval: unknown decode mode ", ev_decode);
      for (DecodeMode mode : modes) {
        auto part = evaluate_wer(model, corpus.test, prompt, ev_prompt, mode,
                                 threads);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      std::filesystem::create_directories(ev_out);
      write_wer_report_csv(rows, ev_out + "/wer_report.csv");
      if (variant_has_classifier(model.config().variant)) {
        auto lca = layer_classification_accuracy(model, corpus.test, prompt,
                                                 threads);
        write_lca_report_csv(lca, ev_out + "/lca_report.csv");
      } else {
        std::fprintf(stderr,
                     "eval: variant %s has no language classifiers; "
                     "lca_report.csv skipped\n",
                     variant_name(model.config().variant));
      }
      ordered_json manifest;
      manifest["command"] = "eval";
      manifest["ckpt"] = ev_ckpt;
      manifest["ckpt_sha256"] = sha256_file_hex(ev_ckpt);
      manifest["corpus"] = ev_corpus;
      manifest["corpus_sha256"] = sha256_file_hex(ev_corpus);
      manifest["prompt"] = ev_prompt;
      manifest["decode"] = ev_decode;
      manifest["model_config"] = ordered_json::parse(ckpt.model_config_json);
      write_manifest(ev_out, manifest);
      std::printf("eval: wrote reports to %s\n", ev_out.c_str());
      return 0;
    }
    if (sw->parsed()) {
      Checkpoint ckpt = load_checkpoint(sw_ckpt);
      Model model = ckpt.to_model();
      Corpus corpus = load_corpus_jsonl(sw_corpus);
      int threads = resolve_threads(sw_threads_flag);
      CM_CHECK(sw_decode == "ar" || sw_decode == "nar",
               "sweep: decode must be ar or nar, got ", sw_decode);
      DecodeMode mode = sw_decode == "ar" ? DecodeMode::AR : DecodeMode::NAR;
      std::vector<Utterance> utts;
      for (const auto& u : corpus.test)
        if (u.language_id == sw_language) utts.push_back(u);
      CM_CHECK(!utts.empty(), "sweep: no test utterances for language ",
               sw_language);
      SweepResult sweep = prompt_sweep(model, utts, sw_language, mode, threads);
      std::filesystem::create_directories(sw_out);
      const std::string variant = variant_name(model.config().variant);
      write_sweep_csv(sweep, variant, sw_out + "/sweep.csv");
      if (!sw_no_svg) write_sweep_svg(sweep, variant, sw_out + "/sweep.svg");
      ordered_json manifest;
      manifest["command"] = "sweep";
      manifest["ckpt"] = sw_ckpt;
      manifest["ckpt_sha256"] = sha256_file_hex(sw_ckpt);
      manifest["corpus"] = sw_corpus;
      manifest["corpus_sha256"] = sha256_file_hex(sw_corpus);
      manifest["language"] = sw_language;
      manifest["decode"] = sw_decode;
      write_manifest(sw_out, manifest);
      std::printf("sweep: wrote sweep.csv%s to %s\n",
                  sw_no_svg ? "" : " and sweep.svg", sw_out.c_str());
      return 0;
    }
    if (gc->parsed()) {
      std::printf("primitive op gradient checks (%d cases each, tol 1e-5):\n",
                  gc_cases);
      GradCheckReport report = run_primitive_gradchecks(gc_seed, gc_cases);
      for (const auto& r : report.results)
        std::printf("  %-24s %4d cases  max_rel_err %.3e  %s\n", r.op.c_str(),
                    r.cases, r.max_rel_err, r.pass ? "ok" : "FAIL");
      ModelGradCheck full = run_model_gradcheck(gc_seed);
      bool full_pass = full.max_rel_err < 1e-4;
      std::printf(
          "full micro-model check: %d params, max_rel_err %.3e (tol 1e-4), "
          "%.1fs  %s\n",
          full.num_params, full.max_rel_err, full.seconds,
          full_pass ? "ok" : "FAIL");
      if (!report.all_pass || !full_pass) {
        std::fprintf(stderr, "gradcheck: FAILED\n");
        return 2;
      }
      std::printf("gradcheck: all passed\n");
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
