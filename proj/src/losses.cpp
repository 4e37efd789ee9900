// Copyright 2026 csvmasr authors
// Loss implementations.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/losses.hpp"

#include <cmath>
#include <limits>

namespace csvmasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}


// Extended label sequence: blank, y0, blank, y1, ..., blank.
std::vector<int> extend_target(const std::vector<int>& target, int blank_id) {
  std::vector<int> ext(2 * target.size() + 1, blank_id);
  for (size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

}  // namespace

int ctc_min_frames(const std::vector<int>& target) {
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return static_cast<int>(target.size()) + repeats;
}

bool ctc_feasible(int num_frames, const std::vector<int>& target) {
  return num_frames >= ctc_min_frames(target);
}

Var ctc_loss(Var log_probs, const std::vector<int>& target, int blank_id) {
  const int T = log_probs.rows();
  const int V = log_probs.cols();
  CM_CHECK(0 <= blank_id && blank_id < V, "ctc_loss: blank id ", blank_id,
           " out of range [0, ", V, ")");
  for (int y : target)
    CM_CHECK(0 <= y && y < V && y != blank_id, "ctc_loss: target token ", y,
             " invalid for vocab ", V, " with blank ", blank_id);
  if (!ctc_feasible(T, target))
    throw Error(detail::format_msg(
        "ctc_loss: infeasible target (needs ", ctc_min_frames(target),
        " frames, got ", T, "); not a numeric failure"));

  const std::vector<int> ext = extend_target(target, blank_id);
  const int S = static_cast<int>(ext.size());
  const auto& lp = log_probs.value();
  auto lpat = [&](int t, int v) { return lp[static_cast<int64_t>(t) * V + v]; };

  // Forward variables, alpha(t, s) in log space.
  std::vector<double> alpha(static_cast<int64_t>(T) * S, kNegInf);
  alpha[0] = lpat(0, ext[0]);
  if (S > 1) alpha[1] = lpat(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double best = alpha[static_cast<int64_t>(t - 1) * S + s];
      if (s >= 1) best = lse2(best, alpha[static_cast<int64_t>(t - 1) * S + s - 1]);
      // Skip transition allowed only between distinct non-blank labels.
      if (s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2])
        best = lse2(best, alpha[static_cast<int64_t>(t - 1) * S + s - 2]);
      alpha[static_cast<int64_t>(t) * S + s] =
          (best == kNegInf) ? kNegInf : best + lpat(t, ext[s]);
    }
  }
  double log_p = alpha[static_cast<int64_t>(T - 1) * S + S - 1];
  if (S > 1) log_p = lse2(log_p, alpha[static_cast<int64_t>(T - 1) * S + S - 2]);
  CM_CHECK(log_p != kNegInf, "ctc_loss: zero total path probability");
  double loss = -log_p;

  int pl = log_probs.id;
  return log_probs.tape->emit(
      Shape{1, 1}, {loss}, {log_probs},
      [pl, ext, T, V, S, blank_id, alpha = std::move(alpha), log_p](
          Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(pl)) return;
        const auto& lp = t.value_of(pl);
        auto lpat = [&](int tt, int v) {
          return lp[static_cast<int64_t>(tt) * V + v];
        };
        // Backward variables beta(t, s), same emission convention as alpha:
        // path sum through (t, s) = exp(alpha + beta - logp(t, ext[s])).
        std::vector<double> beta(static_cast<int64_t>(T) * S, kNegInf);
        beta[static_cast<int64_t>(T - 1) * S + S - 1] = lpat(T - 1, ext[S - 1]);
        if (S > 1)
          beta[static_cast<int64_t>(T - 1) * S + S - 2] = lpat(T - 1, ext[S - 2]);
        for (int tt = T - 2; tt >= 0; --tt) {
          for (int s = S - 1; s >= 0; --s) {
            double best = beta[static_cast<int64_t>(tt + 1) * S + s];
            if (s + 1 < S)
              best = lse2(best, beta[static_cast<int64_t>(tt + 1) * S + s + 1]);
            if (s + 2 < S && ext[s + 2] != blank_id && ext[s + 2] != ext[s])
              best = lse2(best, beta[static_cast<int64_t>(tt + 1) * S + s + 2]);
            beta[static_cast<int64_t>(tt) * S + s] =
                (best == kNegInf) ? kNegInf : best + lpat(tt, ext[s]);
          }
        }
        auto& gx = t.grad_acc(pl);
        double g0 = g[0];
        for (int tt = 0; tt < T; ++tt) {
          // Accumulate log path-sums per vocab symbol present in ext.
          for (int s = 0; s < S; ++s) {
            double a = alpha[static_cast<int64_t>(tt) * S + s];
            double b = beta[static_cast<int64_t>(tt) * S + s];
            if (a == kNegInf || b == kNegInf) continue;
            int v = ext[s];
            double w = a + b - lpat(tt, v) - log_p;
            gx[static_cast<int64_t>(tt) * V + v] -= g0 * std::exp(w);
          }
        }
      },
      "ctc_loss");
}

Var attention_loss(Var decoder_logits, const std::vector<int>& gold_with_eos) {
  CM_CHECK(decoder_logits.rows() == static_cast<int>(gold_with_eos.size()),
           "attention_loss: ", decoder_logits.rows(), " logit rows vs ",
           gold_with_eos.size(), " gold tokens");
  return cross_entropy_mean(decoder_logits, gold_with_eos);
}

Var language_loss(Tape& tape, const std::vector<Var>& layer_logits,
                  int ground_truth_language, bool* warned) {
  if (warned != nullptr) *warned = false;
  if (layer_logits.empty()) {
    if (warned != nullptr) *warned = true;
    return tape.constant(Shape{1, 1}, {0.0}, "language_loss_zero");
  }
  Var acc;
  for (const Var& logits : layer_logits) {
    std::vector<int> gt(logits.rows(), ground_truth_language);
    Var layer = cross_entropy_mean(logits, gt);  // framewise rows average here
    acc = acc.valid() ? add(acc, layer) : layer;
  }
  return scale(acc, 1.0 / static_cast<double>(layer_logits.size()));
}

TotalLoss total_loss(Var ctc, Var att, Var lang, const LossConfig& cfg) {
  cfg.validate();
  Var asr = add(scale(ctc, cfg.beta), scale(att, 1.0 - cfg.beta));
  Var total = add(scale(asr, 1.0 - cfg.lambda), scale(lang, cfg.lambda));
  return TotalLoss{ctc, att, lang, total};
}

}  // namespace csvmasr
