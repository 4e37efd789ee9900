// Copyright 2026 csvmasr authors
// Training loop implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "csvmasr/eval.hpp"
#include "csvmasr/manifest.hpp"

namespace csvmasr {

namespace {

constexpr uint64_t kShuffleStream = 0x53485546;
constexpr uint64_t kMaskStream = 0x4D41534B;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t step = 0;

  explicit AdamState(const ParamStore& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      size_t n = params.entry(i).tensor.values.size();
      m.emplace_back(n, 0.0);
      v.emplace_back(n, 0.0);
    }
  }

  void update(ParamStore& params,
              const std::vector<std::vector<double>>& grads, double lr,
              bool round_to_f32) {
    ++step;
    double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& e = params.entry(i);
      if (!e.trainable) continue;
      auto& mi = m[i];
      auto& vi = v[i];
      const auto& gi = grads[i];
      auto& w = e.tensor.values;
      for (size_t j = 0; j < w.size(); ++j) {
        mi[j] = kAdamBeta1 * mi[j] + (1.0 - kAdamBeta1) * gi[j];
        vi[j] = kAdamBeta2 * vi[j] + (1.0 - kAdamBeta2) * gi[j] * gi[j];
        double mhat = mi[j] / bc1;
        double vhat = vi[j] / bc2;
        w[j] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        if (round_to_f32) w[j] = static_cast<double>(static_cast<float>(w[j]));
      }
    }
  }
};

}  // namespace

LidMask sample_lid_mask(int ground_truth, int num_languages, double p_insert,
                        Rng& rng) {
  CM_CHECK(0 <= ground_truth && ground_truth < num_languages,
           "sample_lid_mask: ground truth ", ground_truth, " out of range");
  CM_CHECK(0.0 <= p_insert && p_insert <= 1.0,
           "sample_lid_mask: p_insert out of [0,1]");
  std::vector<uint8_t> bits(num_languages, 0);
  bits[ground_truth] = 1;
  for (int i = 0; i < num_languages; ++i) {
    if (i == ground_truth) continue;
    if (rng.bernoulli(p_insert)) bits[i] = 1;
  }
  return LidMask(std::move(bits));
}

ValMetrics validate_model(const Model& model,
                          const std::vector<Utterance>& split, int threads) {
  ValMetrics out;
  const int L = model.config().num_languages;
  const int n = static_cast<int>(split.size());
  CM_CHECK(n > 0, "validate_model: empty split");

  std::vector<std::vector<int>> hyps(n);
  std::vector<int> lang_pred(n, -1);
  const bool has_cls = variant_has_classifier(model.config().variant);
  parallel_for(n, threads, [&](int i) {
    const Utterance& u = split[i];
    hyps[i] = model.decode_nar(u.feature_tensor(),
                               LidMask::one_hot(L, u.language_id));
    if (has_cls) {
      auto inf = model.infer_encoder(u.feature_tensor(), LidMask::all_hot(L));
      CM_CHECK(!inf.adapters.empty(), "validate: no adapter records");
      lang_pred[i] = predict_language(inf.adapters.back());
    }
  });

  std::vector<std::vector<int>> refs(n);
  for (int i = 0; i < n; ++i) refs[i] = split[i].transcript;
  out.token_acc = 100.0 - wer_percent(refs, hyps);
  if (has_cls) {
    int correct = 0;
    for (int i = 0; i < n; ++i)
      if (lang_pred[i] == split[i].language_id) ++correct;
    out.lang_acc = 100.0 * correct / n;
  }
  return out;
}

TrainResult train(const Corpus& corpus, ModelConfig model_config,
                  const TrainConfig& train_config, const std::string& out_dir,
                  bool verbose) {
  train_config.validate();
  model_config.variant = train_config.variant;
  CM_CHECK(model_config.num_languages == corpus.config.num_languages,
           "train: model languages ", model_config.num_languages,
           " vs corpus ", corpus.config.num_languages);
  CM_CHECK(model_config.d_feat == corpus.config.d_feat, "train: model d_feat ",
           model_config.d_feat, " vs corpus ", corpus.config.d_feat);
  CM_CHECK(model_config.content_vocab == corpus.config.content_vocab_size(),
           "train: model vocab ", model_config.content_vocab, " vs corpus ",
           corpus.config.content_vocab_size());
  CM_CHECK(!corpus.train.empty() && !corpus.val.empty(),
           "train: corpus needs train and val splits");

  Model model(model_config);
  model.init_params(train_config.seed);
  const std::string config_hash = sha256_hex(model.config().to_json_string());

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  AdamState adam(model.params());
  const int n_train = static_cast<int>(corpus.train.size());
  const int L = model_config.num_languages;
  const bool round_f32 = train_config.precision == 32;

  TrainResult result;
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    // Deterministic shuffle and per-utterance prompt masks for this epoch.
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::derive(train_config.seed,
                                {kShuffleStream, static_cast<uint64_t>(epoch)}));
    for (int i = n_train - 1; i > 0; --i) {
      int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
      std::swap(order[i], order[j]);
    }
    Rng mask_rng(Rng::derive(train_config.seed,
                             {kMaskStream, static_cast<uint64_t>(epoch)}));
    std::vector<LidMask> masks;
    masks.reserve(n_train);
    for (int i = 0; i < n_train; ++i)
      masks.push_back(sample_lid_mask(corpus.train[order[i]].language_id, L,
                                      train_config.p_insert, mask_rng));

    double sum_total = 0.0, sum_ctc = 0.0, sum_att = 0.0, sum_lang = 0.0;
    for (int start = 0; start < n_train; start += train_config.batch_size) {
      int count = std::min(train_config.batch_size, n_train - start);
      std::vector<std::vector<std::vector<double>>> item_grads(count);
      std::vector<LossBreakdown> item_loss(count);

      try {
        parallel_for(count, train_config.threads, [&](int b) {
          const Utterance& u = corpus.train[order[start + b]];
          Tape tape;
          BoundParams bound(tape, model.params());
          TotalLoss tl = model.build_loss(tape, bound, u.feature_tensor(),
                                          u.transcript, u.language_id,
                                          masks[start + b]);
          item_loss[b] = tl.values();
          tape.backward(tl.total);
          auto& grads = item_grads[b];
          grads.reserve(model.params().size());
          for (size_t i = 0; i < model.params().size(); ++i)
            grads.push_back(tape.grad_tensor(bound.at(i)).values);
        });
      } catch (const Error& e) {
        throw Error(detail::format_msg("training diverged at epoch ", epoch,
                                       ", step ",
                                       start / train_config.batch_size + 1,
                                       ": ", e.what()));
      }

      // Fixed-order reduction: batch-mean gradients, summed by item index.
      std::vector<std::vector<double>> grads;
      grads.reserve(model.params().size());
      for (size_t i = 0; i < model.params().size(); ++i)
        grads.emplace_back(model.params().entry(i).tensor.values.size(), 0.0);
      for (int b = 0; b < count; ++b) {
        for (size_t i = 0; i < grads.size(); ++i) {
          const auto& src = item_grads[b][i];
          auto& dst = grads[i];
          for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        sum_total += item_loss[b].total;
        sum_ctc += item_loss[b].ctc;
        sum_att += item_loss[b].att;
        sum_lang += item_loss[b].lang;
      }
      double inv = 1.0 / count;
      for (auto& g : grads)
        for (auto& v : g) v *= inv;

      adam.update(model.params(), grads, train_config.learning_rate, round_f32);
    }

    ValMetrics val = validate_model(model, corpus.val, train_config.threads);
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = sum_total / n_train;
    row.ctc = sum_ctc / n_train;
    row.att = sum_att / n_train;
    row.lang = sum_lang / n_train;
    row.val_token_acc = val.token_acc;
    row.val_lang_acc = val.lang_acc;
    result.log.push_back(row);

    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.val_token_acc = val.token_acc;
    meta.val_lang_acc = val.lang_acc;
    meta.config_hash = config_hash;
    result.checkpoints.push_back(Checkpoint::from_model(model, meta));

    if (!out_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.ckpt", epoch);
      save_checkpoint(result.checkpoints.back(), out_dir + "/" + name);
    }
    if (verbose) {
      std::printf(
          "epoch %3d  loss %.4f (ctc %.4f att %.4f lang %.4f)  "
          "val_token_acc %.2f  val_lang_acc %.2f\n",
          epoch, row.train_loss, row.ctc, row.att, row.lang,
          row.val_token_acc, row.val_lang_acc);
      std::fflush(stdout);
    }
  }

  result.averaged =
      average_checkpoints(result.checkpoints, train_config.k_average);
  if (!out_dir.empty()) {
    save_checkpoint(result.averaged, out_dir + "/avg.ckpt");
    write_train_log_csv(result.log, out_dir + "/train_log.csv");
  }
  return result;
}

void write_train_log_csv(const std::vector<EpochLog>& log,
                         const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot write training log: ", path);
  f << "epoch,train_loss,ctc,att,lang,val_token_acc,val_lang_acc\n";
  char line[256];
  for (const auto& row : log) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f\n",
                  row.epoch, row.train_loss, row.ctc, row.att, row.lang,
                  row.val_token_acc, row.val_lang_acc);
    f << line;
  }
}

}  // namespace csvmasr
