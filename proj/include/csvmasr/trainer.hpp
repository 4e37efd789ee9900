// Copyright 2026 csvmasr authors
// Training loop: multihot LID sampling, Adam optimization, per-epoch
// validation (NAR token accuracy and language accuracy), checkpointing and
// best-K averaging. Byte-deterministic for a fixed seed at any thread count.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "csvmasr/checkpoint.hpp"
#include "csvmasr/corpus.hpp"
#include "csvmasr/model.hpp"
#include "csvmasr/rng.hpp"

namespace csvmasr {

struct TrainConfig {
  double p_insert = 0.5;
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 8;
  int k_average = 3;
  uint64_t seed = 0;
  RoutingVariant variant = RoutingVariant::SummaryVector;
  int precision = 64;  // 32 rounds parameters through float32 each step
  int threads = 1;

  void validate() const {
    CM_CHECK(0.0 <= p_insert && p_insert <= 1.0, "p_insert out of [0,1]");
    CM_CHECK(learning_rate >= 0.0, "learning_rate must be non-negative");
    CM_CHECK(epochs > 0 && batch_size > 0, "epochs/batch_size must be positive");
    CM_CHECK(1 <= k_average && k_average <= epochs,
             "k_average must be in 1..epochs");
    CM_CHECK(precision == 32 || precision == 64, "precision must be 32 or 64");
    CM_CHECK(threads >= 1, "threads must be >= 1");
  }
};

// Ground-truth bit always set; every other bit set independently with
// probability p_insert.
LidMask sample_lid_mask(int ground_truth, int num_languages, double p_insert,
                        Rng& rng);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double ctc = 0.0;
  double att = 0.0;
  double lang = 0.0;
  double val_token_acc = 0.0;
  double val_lang_acc = 0.0;
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;  // one per epoch
  std::vector<EpochLog> log;
  Checkpoint averaged;  // best-k_average mean
};

// Trains a fresh model (built from model_config with the config's variant
// forced to train_config.variant). out_dir may be empty to skip writing
// files; otherwise per-epoch checkpoints, avg.ckpt and train_log.csv land
// there. Divergence (non-finite loss) aborts naming epoch and step.
TrainResult train(const Corpus& corpus, ModelConfig model_config,
                  const TrainConfig& train_config,
                  const std::string& out_dir = "", bool verbose = false);

void write_train_log_csv(const std::vector<EpochLog>& log,
                         const std::string& path);

// NAR validation metrics on a split: token accuracy = 100 - WER of CTC
// greedy decodes under 1-hot prompts; language accuracy at the last adapter
// layer under all-hot prompts (0 when the variant has no classifier).
struct ValMetrics {
  double token_acc = 0.0;
  double lang_acc = 0.0;
};
ValMetrics validate_model(const Model& model,
                          const std::vector<Utterance>& split, int threads);

}  // namespace csvmasr
