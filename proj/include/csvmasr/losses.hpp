// Copyright 2026 csvmasr authors
// Training losses: CTC (log-space forward DP with forward-backward
// gradients), attention cross-entropy, auxiliary language classification,
// and their weighted combination
//   L = (1-lambda) * (beta * L_ctc + (1-beta) * L_att) + lambda * L_lang.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <optional>
#include <vector>

#include "csvmasr/ops.hpp"
#include "csvmasr/tensor.hpp"

namespace csvmasr {

struct LossConfig {
  double lambda = 0.5;
  double beta = 0.3;

  void validate() const {
    CM_CHECK(0.0 <= lambda && lambda <= 1.0, "lambda out of [0,1]: ", lambda);
    CM_CHECK(0.0 <= beta && beta <= 1.0, "beta out of [0,1]: ", beta);
  }
};

struct LossBreakdown {
  double ctc = 0.0;
  double att = 0.0;
  double lang = 0.0;
  double total = 0.0;
};

// Minimum frame count for a CTC target: |y| plus one mandatory blank per
// adjacent repeated pair.
int ctc_min_frames(const std::vector<int>& target);
bool ctc_feasible(int num_frames, const std::vector<int>& target);

// -log of the total probability over all valid blank-augmented alignments.
// log_probs: T' x V rows of log-distributions (T' includes the summary row
// when called on encoder output). Throws an "infeasible" error when the
// target cannot fit into T' frames, distinct from numeric failures.
Var ctc_loss(Var log_probs, const std::vector<int>& target, int blank_id);

// Mean token-level cross-entropy of decoder logits against the gold target
// (which must already carry the trailing eos). No label smoothing.
Var attention_loss(Var decoder_logits, const std::vector<int>& gold_with_eos);

// Cross-entropy of each adapter layer's unmasked classifier logits against
// the ground-truth language, averaged over layers; framewise logits (many
// rows) are additionally averaged over frames. With no adapter layers the
// loss is defined as exact zero and *warned is set.
Var language_loss(Tape& tape, const std::vector<Var>& layer_logits,
                  int ground_truth_language, bool* warned = nullptr);

struct TotalLoss {
  Var ctc;
  Var att;
  Var lang;
  Var total;

  LossBreakdown values() const {
    return LossBreakdown{ctc.scalar(), att.scalar(), lang.scalar(),
                         total.scalar()};
  }
};

TotalLoss total_loss(Var ctc, Var att, Var lang, const LossConfig& cfg);

}  // namespace csvmasr
