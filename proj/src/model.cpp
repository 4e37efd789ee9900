// Copyright 2026 csvmasr authors
// Model assembly.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/model.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

namespace csvmasr {

using ordered_json = nlohmann::ordered_json;

void ModelConfig::validate() const {
  encoder.validate();
  CM_CHECK(num_languages >= 2, "model: need >= 2 languages");
  CM_CHECK(d_feat > 0, "model: d_feat must be positive");
  CM_CHECK(content_vocab > 0, "model: content vocab must be positive");
  CM_CHECK(adapter_rank > 0, "model: adapter_rank must be positive");
  DecoderConfig d = decoder;
  d.vocab_size = vocab_size();
  d.validate();
  loss.validate();
  if (variant_has_adapters(variant))
    CM_CHECK(!encoder.adapter_layers.empty(),
             "model: variant ", variant_name(variant),
             " requires at least one adapter layer");
}

std::string ModelConfig::to_json_string() const {
  ordered_json j;
  j["variant"] = variant_name(variant);
  j["num_languages"] = num_languages;
  j["d_feat"] = d_feat;
  j["content_vocab"] = content_vocab;
  j["adapter_rank"] = adapter_rank;
  ordered_json e;
  e["num_layers"] = encoder.num_layers;
  e["d_model"] = encoder.d_model;
  e["num_heads"] = encoder.num_heads;
  e["ffn_dim"] = encoder.ffn_dim;
  e["conv_kernel"] = encoder.conv_kernel;
  e["adapter_layers"] = encoder.adapter_layers;
  e["rel_pos_clip"] = encoder.rel_pos_clip;
  j["encoder"] = std::move(e);
  ordered_json d;
  d["num_layers"] = decoder.num_layers;
  d["d_model"] = decoder.d_model;
  d["num_heads"] = decoder.num_heads;
  d["ffn_dim"] = decoder.ffn_dim;
  d["max_decode_len"] = decoder.max_decode_len;
  d["beam_width"] = decoder.beam_width;
  j["decoder"] = std::move(d);
  ordered_json l;
  l["lambda"] = loss.lambda;
  l["beta"] = loss.beta;
  j["loss"] = std::move(l);
  return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& json) {
  ordered_json j = ordered_json::parse(json);
  ModelConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.num_languages = j.at("num_languages").get<int>();
  c.d_feat = j.at("d_feat").get<int>();
  c.content_vocab = j.at("content_vocab").get<int>();
  c.adapter_rank = j.at("adapter_rank").get<int>();
  const auto& e = j.at("encoder");
  c.encoder.num_layers = e.at("num_layers").get<int>();
  c.encoder.d_model = e.at("d_model").get<int>();
  c.encoder.num_heads = e.at("num_heads").get<int>();
  c.encoder.ffn_dim = e.at("ffn_dim").get<int>();
  c.encoder.conv_kernel = e.at("conv_kernel").get<int>();
  c.encoder.adapter_layers = e.at("adapter_layers").get<std::vector<int>>();
  c.encoder.rel_pos_clip = e.at("rel_pos_clip").get<int>();
  const auto& d = j.at("decoder");
  c.decoder.num_layers = d.at("num_layers").get<int>();
  c.decoder.d_model = d.at("d_model").get<int>();
  c.decoder.num_heads = d.at("num_heads").get<int>();
  c.decoder.ffn_dim = d.at("ffn_dim").get<int>();
  c.decoder.max_decode_len = d.at("max_decode_len").get<int>();
  c.decoder.beam_width = d.at("beam_width").get<int>();
  c.decoder.vocab_size = c.vocab_size();
  const auto& l = j.at("loss");
  c.loss.lambda = l.at("lambda").get<double>();
  c.loss.beta = l.at("beta").get<double>();
  c.validate();
  return c;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.decoder.d_model = cfg_.encoder.d_model;
  cfg_.decoder.vocab_size = cfg_.vocab_size();
  cfg_.validate();
}

namespace {

struct Init {
  ParamStore* store;
  Rng* rng;

  void weight(const std::string& name, int rows, int cols) {
    double std = 1.0 / std::sqrt(static_cast<double>(rows));
    store->add(name, Tensor::randn(Shape{rows, cols}, *rng, std, true));
  }
  void zeros(const std::string& name, int rows, int cols) {
    store->add(name, Tensor::zeros(Shape{rows, cols}, true));
  }
  void ones(const std::string& name, int rows, int cols) {
    store->add(name, Tensor::full(Shape{rows, cols}, 1.0, true));
  }
  void gaussian(const std::string& name, int rows, int cols, double std) {
    store->add(name, Tensor::randn(Shape{rows, cols}, *rng, std, true));
  }
  void ln(const std::string& prefix, int d) {
    ones(prefix + ".g", 1, d);
    zeros(prefix + ".b", 1, d);
  }
  void attention(const std::string& prefix, int d) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) weight(prefix + w, d, d);
    for (const char* b : {"bq", "bk", "bv", "bo"}) zeros(prefix + b, 1, d);
  }
  void ffn(const std::string& prefix, int d, int hidden) {
    ln(prefix + "ln", d);
    weight(prefix + "w1", d, hidden);
    zeros(prefix + "b1", 1, hidden);
    weight(prefix + "w2", hidden, d);
    zeros(prefix + "b2", 1, d);
  }
};

}  // namespace

void Model::init_params(uint64_t seed) {
  params_ = ParamStore();
  Rng rng(Rng::derive(seed, {0x4D4F44454C}));  // independent of corpus streams
  Init init{&params_, &rng};
  const auto& enc = cfg_.encoder;
  const int d = enc.d_model;

  init.weight("enc.in_proj.w", cfg_.encoder_input_dim(), d);
  init.zeros("enc.in_proj.b", 1, d);
  init.gaussian("enc.sv", 1, d, 0.5);

  for (int layer = 1; layer <= enc.num_layers; ++layer) {
    std::string p = "enc.l" + std::to_string(layer) + ".";
    init.ffn(p + "ffn1.", d, enc.ffn_dim);
    init.ln(p + "attn.ln", d);
    init.attention(p + "attn.", d);
    init.zeros(p + "attn.relbias", enc.num_rel_buckets(), enc.num_heads);
    init.ln(p + "conv.ln", d);
    init.weight(p + "conv.pw1.w", d, 2 * d);
    init.zeros(p + "conv.pw1.b", 1, 2 * d);
    init.gaussian(p + "conv.dw.w", enc.conv_kernel, d,
                  1.0 / std::sqrt(static_cast<double>(enc.conv_kernel)));
    init.zeros(p + "conv.dw.b", 1, d);
    init.ln(p + "conv.ln2", d);
    init.weight(p + "conv.pw2.w", d, d);
    init.zeros(p + "conv.pw2.b", 1, d);
    init.ffn(p + "ffn2.", d, enc.ffn_dim);
    init.ln(p + "final_ln", d);

    if (enc.is_adapter_layer(layer) && variant_has_adapters(cfg_.variant)) {
      for (int lang = 0; lang < cfg_.num_languages; ++lang) {
        std::string a = p + "adapter" + std::to_string(lang) + ".";
        init.weight(a + "down.w", d, cfg_.adapter_rank);
        init.zeros(a + "down.b", 1, cfg_.adapter_rank);
        // Zero-init up-projection: adapters start as exact no-ops and the
        // combination degenerates to the plain backbone.
        init.zeros(a + "up.w", cfg_.adapter_rank, d);
        init.zeros(a + "up.b", 1, d);
      }
      if (variant_has_classifier(cfg_.variant)) {
        init.weight(p + "cls.w", d, cfg_.num_languages);
        init.zeros(p + "cls.b", 1, cfg_.num_languages);
      }
    }
  }

  const int vocab = cfg_.vocab_size();
  init.gaussian("dec.embed", vocab, d, 1.0 / std::sqrt(static_cast<double>(d)));
  init.gaussian("dec.pos", cfg_.decoder.max_decode_len + 1, d,
                1.0 / std::sqrt(static_cast<double>(d)));
  for (int layer = 1; layer <= cfg_.decoder.num_layers; ++layer) {
    std::string p = "dec.l" + std::to_string(layer) + ".";
    init.ln(p + "self.ln", d);
    init.attention(p + "self.", d);
    init.ln(p + "cross.ln", d);
    init.attention(p + "cross.", d);
    init.ffn(p + "ffn.", d, cfg_.decoder.ffn_dim);
  }
  init.ln("dec.final_ln", d);
  init.weight("dec.out.w", d, vocab);
  init.zeros("dec.out.b", 1, vocab);
  init.weight("ctc.w", d, vocab);
  init.zeros("ctc.b", 1, vocab);
}

EncoderOutput Model::build_encoder(Tape& tape, const BoundParams& bound,
                                   const Tensor& features,
                                   const LidMask& mask) const {
  CM_CHECK(features.shape.rows >= 1, "encode: empty utterance");
  CM_CHECK(features.shape.cols == cfg_.d_feat, "encode: feature width ",
           features.shape.cols, " vs d_feat ", cfg_.d_feat);
  mask.validate();
  CM_CHECK(mask.size() == cfg_.num_languages, "encode: mask has ",
           mask.size(), " bits for ", cfg_.num_languages, " languages");

  Tensor input = cfg_.variant == RoutingVariant::LidConcat
                     ? lidconcat_augment(features, mask)
                     : features;
  Var feat_var = tape.constant(input.shape, input.values, "features");

  AdapterHook hook;
  if (variant_has_adapters(cfg_.variant)) {
    hook = [this, &bound, mask](Tape& t, Var h0, int layer,
                                AdapterRecord& record) -> Var {
      std::string p = "enc.l" + std::to_string(layer) + ".";
      std::optional<ClassifierRef> classifier;
      if (variant_has_classifier(cfg_.variant))
        classifier = ClassifierRef{bound[p + "cls.w"], bound[p + "cls.b"]};
      RouteResult routed = route(t, h0, record.sv_snapshot, mask,
                                 cfg_.variant, classifier);
      std::vector<ActiveExpert> experts;
      for (int lang = 0; lang < cfg_.num_languages; ++lang) {
        if (!mask.active(lang)) continue;  // inactive experts never evaluated
        std::string a = p + "adapter" + std::to_string(lang) + ".";
        experts.push_back(ActiveExpert{
            lang, adapter_forward(h0, bound[a + "down.w"], bound[a + "down.b"],
                                  bound[a + "up.w"], bound[a + "up.b"])});
      }
      record.lang_logits = routed.lang_logits;
      record.framewise = routed.framewise;
      record.alpha = Tensor(routed.alpha.shape(), routed.alpha.value());
      return combine(h0, experts, routed.alpha, routed.framewise);
    };
  }
  return encode_frames(tape, bound, cfg_.encoder, feat_var, hook);
}

Var Model::build_ctc_log_probs(const BoundParams& bound, Var frames) const {
  return log_softmax_rows(
      add_rowvec(matmul(frames, bound["ctc.w"]), bound["ctc.b"]));
}

TotalLoss Model::build_loss(Tape& tape, const BoundParams& bound,
                            const Tensor& features,
                            const std::vector<int>& transcript,
                            int language_id, const LidMask& mask) const {
  CM_CHECK(0 <= language_id && language_id < cfg_.num_languages,
           "build_loss: language ", language_id, " out of range");
  CM_CHECK(static_cast<int>(transcript.size()) <= cfg_.decoder.max_decode_len,
           "build_loss: transcript length ", transcript.size(),
           " exceeds max_decode_len ", cfg_.decoder.max_decode_len);
  EncoderOutput enc = build_encoder(tape, bound, features, mask);

  Var ctc_lp = build_ctc_log_probs(bound, enc.frames);
  Var ctc = ctc_loss(ctc_lp, transcript, cfg_.blank_id());

  std::vector<int> prefix;
  prefix.reserve(transcript.size() + 1);
  prefix.push_back(cfg_.sos_id());
  prefix.insert(prefix.end(), transcript.begin(), transcript.end());
  std::vector<int> gold = transcript;
  gold.push_back(cfg_.eos_id());
  Var dec_logits =
      decoder_forward(tape, bound, cfg_.decoder, enc.frames, prefix);
  Var att = attention_loss(dec_logits, gold);

  std::vector<Var> lang_logits;
  for (const auto& rec : enc.adapters)
    if (rec.lang_logits.valid()) lang_logits.push_back(rec.lang_logits);
  Var lang = language_loss(tape, lang_logits, language_id);

  return total_loss(ctc, att, lang, cfg_.loss);
}

Program Model::loss_program(Tensor features, std::vector<int> transcript,
                            int language_id, LidMask mask) const {
  return [this, features = std::move(features),
          transcript = std::move(transcript), language_id,
          mask = std::move(mask)](Tape& tape, const BoundParams& bound) {
    return build_loss(tape, bound, features, transcript, language_id, mask)
        .total;
  };
}

Model::Inference Model::infer_encoder(const Tensor& features,
                                      const LidMask& mask) const {
  Tape tape;
  BoundParams bound(tape, params_, /*bind_grads=*/false);
  EncoderOutput enc = build_encoder(tape, bound, features, mask);
  Var ctc_lp = build_ctc_log_probs(bound, enc.frames);
  Inference out;
  out.frames = Tensor(enc.frames.shape(), enc.frames.value());
  out.ctc_log_probs = Tensor(ctc_lp.shape(), ctc_lp.value());
  for (const auto& rec : enc.adapters) {
    AdapterInfo info;
    info.layer = rec.layer;
    info.sv_snapshot = Tensor(rec.sv_snapshot.shape(), rec.sv_snapshot.value());
    if (rec.lang_logits.valid())
      info.lang_logits = Tensor(rec.lang_logits.shape(), rec.lang_logits.value());
    info.alpha = rec.alpha;
    info.framewise = rec.framewise;
    out.adapters.push_back(std::move(info));
  }
  return out;
}

std::vector<int> Model::decode_nar(const Tensor& features,
                                   const LidMask& mask) const {
  Inference inf = infer_encoder(features, mask);
  return ctc_greedy(inf.ctc_log_probs, cfg_.blank_id());
}

DecodeResult Model::decode_ar(const Tensor& features, const LidMask& mask,
                              int beam_width) const {
  Tape tape;
  BoundParams bound(tape, params_, /*bind_grads=*/false);
  EncoderOutput enc = build_encoder(tape, bound, features, mask);
  Var frames = enc.frames;

  StepFn step = [this, &tape, &bound, frames](const std::vector<int>& generated) {
    std::vector<int> prefix;
    prefix.reserve(generated.size() + 1);
    prefix.push_back(cfg_.sos_id());
    prefix.insert(prefix.end(), generated.begin(), generated.end());
    Var logits = decoder_forward(tape, bound, cfg_.decoder, frames, prefix);
    Var logp = log_softmax_rows(row(logits, logits.rows() - 1));
    return logp.value();
  };

  BeamConfig bc;
  bc.vocab_size = cfg_.vocab_size();
  bc.sos_id = cfg_.sos_id();
  bc.eos_id = cfg_.eos_id();
  bc.blank_id = cfg_.blank_id();
  bc.max_len = cfg_.decoder.max_decode_len;
  bc.width = beam_width > 0 ? beam_width : cfg_.decoder.beam_width;
  return beam_search(step, bc);
}

ModelGradCheck run_model_gradcheck(uint64_t seed, double epsilon) {
  ModelConfig cfg;
  cfg.encoder.num_layers = 2;
  cfg.encoder.d_model = 8;
  cfg.encoder.num_heads = 2;
  cfg.encoder.ffn_dim = 16;
  cfg.encoder.conv_kernel = 3;
  cfg.encoder.adapter_layers = {2};
  cfg.encoder.rel_pos_clip = 4;
  cfg.decoder.num_layers = 1;
  cfg.decoder.ffn_dim = 16;
  cfg.decoder.max_decode_len = 8;
  cfg.variant = RoutingVariant::SummaryVector;
  cfg.num_languages = 3;
  cfg.d_feat = 5;
  cfg.content_vocab = 9;  // 3 tokens per language
  cfg.adapter_rank = 4;

  Model model(cfg);
  model.init_params(seed);
  // Randomize every parameter so no gradient path is structurally zero.
  Rng rng(Rng::derive(seed, {0x47524144}));
  for (size_t i = 0; i < model.params().size(); ++i) {
    auto& e = model.params().entry(i);
    bool is_ln_gain = e.name.size() >= 4 &&
                      e.name.compare(e.name.size() - 4, 4, "ln.g") == 0;
    for (auto& v : e.tensor.values)
      v = is_ln_gain ? 1.0 + rng.gaussian(0.0, 0.2) : rng.gaussian(0.0, 0.3);
  }

  const int T = 6;
  Tensor features = Tensor::randn(Shape{T, cfg.d_feat}, rng);
  std::vector<int> transcript = {0, 2};  // language 0 tokens
  LidMask mask = LidMask::all_hot(cfg.num_languages);  // multihot: routing live
  Program program = model.loss_program(features, transcript, 0, mask);

  auto t0 = std::chrono::steady_clock::now();
  auto [value, analytic] = value_and_grad(program, model.params());
  (void)value;
  GradMap numeric = finite_diff_grad(program, model.params(), epsilon);
  auto t1 = std::chrono::steady_clock::now();

  ModelGradCheck out;
  out.max_rel_err = max_grad_rel_error(analytic, numeric, 1e-3);
  out.num_params = static_cast<int>(model.params().value_count(true));
  out.seconds = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

}  // namespace csvmasr
