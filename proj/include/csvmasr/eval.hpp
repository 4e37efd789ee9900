// Copyright 2026 csvmasr authors
// Evaluation: token-level WER, per-adapter-layer language classification
// accuracy, prompting sweeps, CSV reports and the sweep SVG chart.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csvmasr/corpus.hpp"
#include "csvmasr/model.hpp"

namespace csvmasr {

enum class DecodeMode { AR, NAR };
inline const char* decode_mode_name(DecodeMode m) {
  return m == DecodeMode::AR ? "ar" : "nar";
}

// Unit-cost Levenshtein distance (iterative DP).
int edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp);

// Aggregate WER percentage: total edits / total reference tokens * 100.
// Rejects an empty reference corpus.
double wer_percent(const std::vector<std::vector<int>>& refs,
                   const std::vector<std::vector<int>>& hyps);

// Chooses the prompt mask for an utterance ("1hot", "allhot" or a fixed
// explicit mask).
using PromptFn = std::function<LidMask(const Utterance&)>;
PromptFn make_prompt(const std::string& spec, int num_languages);

std::vector<std::vector<int>> decode_split(const Model& model,
                                           const std::vector<Utterance>& utts,
                                           const PromptFn& prompt,
                                           DecodeMode mode, int threads);

struct WerRow {
  std::string variant;
  std::string prompt;
  std::string decode_mode;
  std::string language;  // "l<k>" or "all"
  double wer = 0.0;
};

// Per-language rows plus the aggregate ("all") row computed from total
// edits over total reference tokens, not the mean of per-language WERs.
std::vector<WerRow> evaluate_wer(const Model& model,
                                 const std::vector<Utterance>& utts,
                                 const PromptFn& prompt,
                                 const std::string& prompt_name,
                                 DecodeMode mode, int threads);

// Language prediction from one adapter layer's record: argmax of the
// unmasked classifier logits; framewise records vote per frame (ties toward
// the smaller language id).
int predict_language(const AdapterInfo& info);

struct LcaRow {
  std::string variant;
  int layer = 0;          // 1-based encoder layer carrying the adapter
  std::string language;   // "l<k>" or "all"
  double accuracy = 0.0;  // percent
};

// Accuracy per adapter layer under the given prompt (conventionally
// all-hot). Rejects variants without classifiers.
std::vector<LcaRow> layer_classification_accuracy(
    const Model& model, const std::vector<Utterance>& utts,
    const PromptFn& prompt, int threads);

struct SweepRow {
  int k = 0;  // number of additional (non-ground-truth) languages prompted
  double mean_wer = 0.0;
  double ci95 = 0.0;  // 1.96 x standard error over masks
  int num_masks = 0;
};

struct MaskWer {
  int k = 0;
  std::string mask;  // bit string, ground-truth bit always set
  double wer = 0.0;
};

struct SweepResult {
  int language = 0;
  DecodeMode mode = DecodeMode::NAR;
  std::vector<SweepRow> rows;      // k = 0 .. L-1
  std::vector<MaskWer> mask_wers;  // per-mask breakdown; k=1 slice is the
                                   // 2-hot per-added-language view
};

// For each k, evaluates WER under every mask consisting of the ground truth
// plus k additional languages: C(L-1, k) masks per row, 2^(L-1) in total.
SweepResult prompt_sweep(const Model& model,
                         const std::vector<Utterance>& utts_of_language,
                         int language, DecodeMode mode, int threads);

void write_wer_report_csv(const std::vector<WerRow>& rows,
                          const std::string& path);
void write_lca_report_csv(const std::vector<LcaRow>& rows,
                          const std::string& path);
void write_sweep_csv(const SweepResult& sweep, const std::string& variant,
                     const std::string& path);
void write_sweep_svg(const SweepResult& sweep, const std::string& variant,
                     const std::string& path);

}  // namespace csvmasr
