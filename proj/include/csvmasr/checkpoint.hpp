// Copyright 2026 csvmasr authors
// Checkpoint files: one JSON header line (metadata + tensor directory with
// name/shape/byte-offset), then little-endian float32 payloads in directory
// order. Values held in memory are always exactly float32-representable, so
// averaging and save/load round-trips are bit-stable.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "csvmasr/model.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

struct CheckpointMeta {
  int epoch = 0;
  double val_token_acc = 0.0;
  double val_lang_acc = 0.0;
  std::string config_hash;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::string model_config_json;
  ParamStore params;  // float32-rounded values

  // Snapshots the model's parameters, rounding through float32.
  static Checkpoint from_model(const Model& model, CheckpointMeta meta);
  Model to_model() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Select the k best checkpoints by validation token accuracy (ties resolved
// toward the earlier epoch) and return their element-wise parameter mean.
// Accumulation runs in epoch order with float64 sums over float32 values, so
// the result is invariant to the order of the input list and idempotent on
// identical checkpoints.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints,
                               int k_average);

}  // namespace csvmasr
