// Copyright 2026 csvmasr authors
// Checkpoint IO and averaging.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "csvmasr/manifest.hpp"

namespace csvmasr {

using ordered_json = nlohmann::ordered_json;

namespace {

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void put_f32_le(std::string& out, float f) {
  uint32_t u = std::bit_cast<uint32_t>(f);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) |
               (static_cast<uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

Checkpoint Checkpoint::from_model(const Model& model, CheckpointMeta meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  ckpt.model_config_json = model.config().to_json_string();
  if (ckpt.meta.config_hash.empty())
    ckpt.meta.config_hash = sha256_hex(ckpt.model_config_json);
  for (size_t i = 0; i < model.params().size(); ++i) {
    const auto& e = model.params().entry(i);
    Tensor t = e.tensor;
    for (auto& v : t.values) v = round_f32(v);
    ckpt.params.add(e.name, std::move(t), e.trainable);
  }
  return ckpt;
}

Model Checkpoint::to_model() const {
  Model model(ModelConfig::from_json_string(model_config_json));
  model.init_params(0);  // establishes the canonical parameter layout
  CM_CHECK(model.params().size() == params.size(),
           "checkpoint has ", params.size(), " tensors, model expects ",
           model.params().size());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& src = params.entry(i);
    auto& dst = model.params().entry(i);
    CM_CHECK(src.name == dst.name, "checkpoint tensor order mismatch at '",
             src.name, "' (expected '", dst.name, "')");
    CM_CHECK(src.tensor.shape == dst.tensor.shape,
             "checkpoint tensor '", src.name, "' has shape ",
             src.tensor.shape.str(), ", model expects ",
             dst.tensor.shape.str());
    dst.tensor.values = src.tensor.values;
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ordered_json header;
  header["format"] = "csvmasr-ckpt";
  header["version"] = 1;
  ordered_json meta;
  meta["epoch"] = ckpt.meta.epoch;
  meta["val_token_acc"] = ckpt.meta.val_token_acc;
  meta["val_lang_acc"] = ckpt.meta.val_lang_acc;
  meta["config_hash"] = ckpt.meta.config_hash;
  meta["model_config"] = ordered_json::parse(ckpt.model_config_json);
  header["meta"] = std::move(meta);
  ordered_json dir = ordered_json::array();
  int64_t offset = 0;  // bytes from the start of the payload section
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& e = ckpt.params.entry(i);
    ordered_json t;
    t["name"] = e.name;
    t["shape"] = {e.tensor.shape.rows, e.tensor.shape.cols};
    t["offset"] = offset;
    t["count"] = e.tensor.shape.size();
    t["trainable"] = e.trainable;
    dir.push_back(std::move(t));
    offset += e.tensor.shape.size() * 4;
  }
  header["tensors"] = std::move(dir);

  std::string payload;
  payload.reserve(static_cast<size_t>(offset));
  for (size_t i = 0; i < ckpt.params.size(); ++i)
    for (double v : ckpt.params.entry(i).tensor.values)
      put_f32_le(payload, static_cast<float>(v));

  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot open checkpoint for writing: ", path);
  f << header.dump() << "\n" << payload;
  CM_CHECK(f.good(), "checkpoint write failed: ", path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot open checkpoint: ", path);
  std::string header_line;
  CM_CHECK(static_cast<bool>(std::getline(f, header_line)),
           "checkpoint missing header: ", path);
  ordered_json header = ordered_json::parse(header_line);
  CM_CHECK(header.at("format") == "csvmasr-ckpt",
           "not a csvmasr checkpoint: ", path);
  std::string payload((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  const auto& meta = header.at("meta");
  ckpt.meta.epoch = meta.at("epoch").get<int>();
  ckpt.meta.val_token_acc = meta.at("val_token_acc").get<double>();
  ckpt.meta.val_lang_acc = meta.at("val_lang_acc").get<double>();
  ckpt.meta.config_hash = meta.at("config_hash").get<std::string>();
  ckpt.model_config_json = meta.at("model_config").dump();

  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Shape shape{t.at("shape")[0].get<int>(), t.at("shape")[1].get<int>()};
    int64_t offset = t.at("offset").get<int64_t>();
    int64_t count = t.at("count").get<int64_t>();
    CM_CHECK(count == shape.size(), "checkpoint tensor '", name,
             "': count ", count, " vs shape ", shape.str());
    CM_CHECK(offset >= 0 &&
                 static_cast<size_t>(offset + count * 4) <= payload.size(),
             "checkpoint tensor '", name, "': payload out of range");
    std::vector<double> values(count);
    const auto* bytes =
        reinterpret_cast<const unsigned char*>(payload.data() + offset);
    for (int64_t i = 0; i < count; ++i)
      values[i] = static_cast<double>(get_f32_le(bytes + i * 4));
    ckpt.params.add(name, Tensor(shape, std::move(values)),
                    t.at("trainable").get<bool>());
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints,
                               int k_average) {
  CM_CHECK(k_average >= 1, "average_checkpoints: k must be >= 1");
  CM_CHECK(static_cast<int>(checkpoints.size()) >= k_average,
           "average_checkpoints: need ", k_average, " checkpoints, have ",
           checkpoints.size());

  // Rank by validation token accuracy; ties go to the earlier epoch.
  std::vector<const Checkpoint*> ranked;
  ranked.reserve(checkpoints.size());
  for (const auto& c : checkpoints) ranked.push_back(&c);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Checkpoint* a, const Checkpoint* b) {
                     if (a->meta.val_token_acc != b->meta.val_token_acc)
                       return a->meta.val_token_acc > b->meta.val_token_acc;
                     return a->meta.epoch < b->meta.epoch;
                   });
  ranked.resize(k_average);
  // Canonical accumulation order (by epoch) makes the mean independent of
  // the order the checkpoints were passed in.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Checkpoint* a, const Checkpoint* b) {
                     return a->meta.epoch < b->meta.epoch;
                   });

  const Checkpoint& ref = *ranked.front();
  Checkpoint avg;
  avg.model_config_json = ref.model_config_json;
  avg.meta.epoch = ranked.back()->meta.epoch;
  avg.meta.config_hash = ref.meta.config_hash;
  double acc_sum = 0.0, lang_sum = 0.0;

  for (size_t i = 0; i < ref.params.size(); ++i) {
    const auto& e0 = ref.params.entry(i);
    std::vector<double> sum(e0.tensor.values.size(), 0.0);
    for (const Checkpoint* c : ranked) {
      CM_CHECK(c->params.size() == ref.params.size(),
               "average_checkpoints: tensor count mismatch");
      const auto& e = c->params.entry(i);
      CM_CHECK(e.name == e0.name, "average_checkpoints: tensor '", e.name,
               "' does not match '", e0.name, "'");
      CM_CHECK(e.tensor.shape == e0.tensor.shape,
               "average_checkpoints: shape mismatch for tensor '", e.name,
               "': ", e.tensor.shape.str(), " vs ", e0.tensor.shape.str());
      for (size_t j = 0; j < sum.size(); ++j) sum[j] += e.tensor.values[j];
    }
    Tensor mean(e0.tensor.shape, std::move(sum));
    for (auto& v : mean.values)
      v = static_cast<double>(static_cast<float>(v / k_average));
    avg.params.add(e0.name, std::move(mean), e0.trainable);
  }
  for (const Checkpoint* c : ranked) {
    acc_sum += c->meta.val_token_acc;
    lang_sum += c->meta.val_lang_acc;
  }
  avg.meta.val_token_acc = acc_sum / k_average;
  avg.meta.val_lang_acc = lang_sum / k_average;
  return avg;
}

}  // namespace csvmasr
