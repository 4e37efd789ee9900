// Copyright 2026 csvmasr authors
// Evaluation implementation.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace csvmasr {

int edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double wer_percent(const std::vector<std::vector<int>>& refs,
                   const std::vector<std::vector<int>>& hyps) {
  CM_CHECK(refs.size() == hyps.size(), "wer: ", refs.size(),
           " references vs ", hyps.size(), " hypotheses");
  CM_CHECK(!refs.empty(), "wer: empty reference corpus");
  int64_t edits = 0, ref_tokens = 0;
  for (size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance(refs[i], hyps[i]);
    ref_tokens += static_cast<int64_t>(refs[i].size());
  }
  CM_CHECK(ref_tokens > 0, "wer: reference corpus has no tokens");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_tokens);
}

PromptFn make_prompt(const std::string& spec, int num_languages) {
  if (spec == "1hot")
    return [num_languages](const Utterance& u) {
      return LidMask::one_hot(num_languages, u.language_id);
    };
  if (spec == "allhot")
    return [num_languages](const Utterance&) {
      return LidMask::all_hot(num_languages);
    };
  if (spec.rfind("mask=", 0) == 0) {
    LidMask mask = LidMask::from_string(spec.substr(5));
    CM_CHECK(mask.size() == num_languages, "prompt mask '", spec, "' has ",
             mask.size(), " bits for ", num_languages, " languages");
    return [mask](const Utterance&) { return mask; };
  }
  throw Error("unknown prompt spec: " + spec +
              " (expected 1hot|allhot|mask=<bits>)");
}

std::vector<std::vector<int>> decode_split(const Model& model,
                                           const std::vector<Utterance>& utts,
                                           const PromptFn& prompt,
                                           DecodeMode mode, int threads) {
  std::vector<std::vector<int>> hyps(utts.size());
  parallel_for(static_cast<int>(utts.size()), threads, [&](int i) {
    const Utterance& u = utts[i];
    LidMask mask = prompt(u);
    hyps[i] = mode == DecodeMode::NAR
                  ? model.decode_nar(u.feature_tensor(), mask)
                  : model.decode_ar(u.feature_tensor(), mask).tokens;
  });
  return hyps;
}

std::vector<WerRow> evaluate_wer(const Model& model,
                                 const std::vector<Utterance>& utts,
                                 const PromptFn& prompt,
                                 const std::string& prompt_name,
                                 DecodeMode mode, int threads) {
  CM_CHECK(!utts.empty(), "evaluate_wer: empty utterance list");
  const int L = model.config().num_languages;
  auto hyps = decode_split(model, utts, prompt, mode, threads);

  std::vector<WerRow> rows;
  const std::string variant = variant_name(model.config().variant);
  for (int lang = 0; lang < L; ++lang) {
    std::vector<std::vector<int>> r, h;
    for (size_t i = 0; i < utts.size(); ++i) {
      if (utts[i].language_id != lang) continue;
      r.push_back(utts[i].transcript);
      h.push_back(hyps[i]);
    }
    if (r.empty()) continue;
    rows.push_back(WerRow{variant, prompt_name, decode_mode_name(mode),
                          "l" + std::to_string(lang), wer_percent(r, h)});
  }
  std::vector<std::vector<int>> refs;
  refs.reserve(utts.size());
  for (const auto& u : utts) refs.push_back(u.transcript);
  rows.push_back(WerRow{variant, prompt_name, decode_mode_name(mode), "all",
                        wer_percent(refs, hyps)});
  return rows;
}

int predict_language(const AdapterInfo& info) {
  CM_CHECK(info.lang_logits.shape.size() > 0,
           "predict_language: record has no classifier logits");
  const Tensor& logits = info.lang_logits;
  const int L = logits.shape.cols;
  if (!info.framewise) {
    CM_CHECK(logits.shape.rows == 1, "predict_language: expected one row");
    int arg = 0;
    for (int j = 1; j < L; ++j)
      if (logits.at(0, j) > logits.at(0, arg)) arg = j;
    return arg;
  }
  // Framewise: per-frame argmax, then majority vote (ties -> smaller id).
  std::vector<int> votes(L, 0);
  for (int t = 0; t < logits.shape.rows; ++t) {
    int arg = 0;
    for (int j = 1; j < L; ++j)
      if (logits.at(t, j) > logits.at(t, arg)) arg = j;
    ++votes[arg];
  }
  int best = 0;
  for (int j = 1; j < L; ++j)
    if (votes[j] > votes[best]) best = j;
  return best;
}

std::vector<LcaRow> layer_classification_accuracy(
    const Model& model, const std::vector<Utterance>& utts,
    const PromptFn& prompt, int threads) {
  CM_CHECK(variant_has_classifier(model.config().variant),
           "layer_classification_accuracy: variant ",
           variant_name(model.config().variant), " has no classifiers");
  CM_CHECK(!utts.empty(), "layer_classification_accuracy: empty utterances");
  const int n = static_cast<int>(utts.size());
  const int L = model.config().num_languages;

  std::vector<std::vector<int>> preds(n);  // per utterance, per adapter layer
  std::vector<int> layer_ids;
  parallel_for(n, threads, [&](int i) {
    auto inf = model.infer_encoder(utts[i].feature_tensor(), prompt(utts[i]));
    CM_CHECK(!inf.adapters.empty(),
             "layer_classification_accuracy: no adapter layers");
    preds[i].reserve(inf.adapters.size());
    for (const auto& rec : inf.adapters) preds[i].push_back(predict_language(rec));
  });
  {
    auto inf = model.infer_encoder(utts[0].feature_tensor(), prompt(utts[0]));
    for (const auto& rec : inf.adapters) layer_ids.push_back(rec.layer);
  }

  std::vector<LcaRow> rows;
  const std::string variant = variant_name(model.config().variant);
  for (size_t a = 0; a < layer_ids.size(); ++a) {
    std::vector<int> correct(L, 0), total(L, 0);
    for (int i = 0; i < n; ++i) {
      ++total[utts[i].language_id];
      if (preds[i][a] == utts[i].language_id) ++correct[utts[i].language_id];
    }
    int correct_all = 0;
    for (int lang = 0; lang < L; ++lang) {
      if (total[lang] == 0) continue;
      rows.push_back(LcaRow{variant, layer_ids[a], "l" + std::to_string(lang),
                            100.0 * correct[lang] / total[lang]});
      correct_all += correct[lang];
    }
    rows.push_back(
        LcaRow{variant, layer_ids[a], "all", 100.0 * correct_all / n});
  }
  return rows;
}

namespace {

// All k-subsets of `pool` in lexicographic order.
void k_subsets(const std::vector<int>& pool, int k,
               std::vector<std::vector<int>>& out) {
  std::vector<int> pick;
  std::function<void(size_t)> rec = [&](size_t start) {
    if (static_cast<int>(pick.size()) == k) {
      out.push_back(pick);
      return;
    }
    for (size_t i = start; i < pool.size(); ++i) {
      pick.push_back(pool[i]);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
}

}  // namespace

SweepResult prompt_sweep(const Model& model,
                         const std::vector<Utterance>& utts_of_language,
                         int language, DecodeMode mode, int threads) {
  const int L = model.config().num_languages;
  CM_CHECK(L >= 2, "prompt_sweep: needs at least two languages");
  CM_CHECK(!utts_of_language.empty(), "prompt_sweep: empty utterance list");
  for (const auto& u : utts_of_language)
    CM_CHECK(u.language_id == language, "prompt_sweep: utterance ",
             u.utterance_id, " has language ", u.language_id, ", expected ",
             language);

  std::vector<int> others;
  for (int lang = 0; lang < L; ++lang)
    if (lang != language) others.push_back(lang);

  std::vector<std::vector<int>> refs;
  refs.reserve(utts_of_language.size());
  for (const auto& u : utts_of_language) refs.push_back(u.transcript);

  SweepResult result;
  result.language = language;
  result.mode = mode;
  for (int k = 0; k <= static_cast<int>(others.size()); ++k) {
    std::vector<std::vector<int>> subsets;
    k_subsets(others, k, subsets);
    std::vector<double> wers;
    wers.reserve(subsets.size());
    for (const auto& subset : subsets) {
      std::vector<uint8_t> bits(L, 0);
      bits[language] = 1;
      for (int lang : subset) bits[lang] = 1;
      LidMask mask{bits};
      PromptFn prompt = [mask](const Utterance&) { return mask; };
      auto hyps = decode_split(model, utts_of_language, prompt, mode, threads);
      double w = wer_percent(refs, hyps);
      wers.push_back(w);
      result.mask_wers.push_back(MaskWer{k, mask.str(), w});
    }
    SweepRow row;
    row.k = k;
    row.num_masks = static_cast<int>(wers.size());
    double mean = 0.0;
    for (double w : wers) mean += w;
    mean /= wers.size();
    row.mean_wer = mean;
    if (wers.size() > 1) {
      double var = 0.0;
      for (double w : wers) var += (w - mean) * (w - mean);
      var /= (wers.size() - 1);  // sample variance over masks
      row.ci95 = 1.96 * std::sqrt(var / wers.size());
    }
    result.rows.push_back(row);
  }
  return result;
}

void write_wer_report_csv(const std::vector<WerRow>& rows,
                          const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot write wer report: ", path);
  f << "variant,prompt,decode_mode,language,wer\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%s,%s,%.4f\n", r.variant.c_str(),
                  r.prompt.c_str(), r.decode_mode.c_str(), r.language.c_str(),
                  r.wer);
    f << line;
  }
}

void write_lca_report_csv(const std::vector<LcaRow>& rows,
                          const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot write lca report: ", path);
  f << "variant,layer,language,accuracy\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%d,%s,%.4f\n", r.variant.c_str(),
                  r.layer, r.language.c_str(), r.accuracy);
    f << line;
  }
}

void write_sweep_csv(const SweepResult& sweep, const std::string& variant,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot write sweep csv: ", path);
  f << "variant,language,k,mean_wer,ci95\n";
  char line[256];
  for (const auto& r : sweep.rows) {
    std::snprintf(line, sizeof(line), "%s,l%d,%d,%.4f,%.4f\n", variant.c_str(),
                  sweep.language, r.k, r.mean_wer, r.ci95);
    f << line;
  }
}

void write_sweep_svg(const SweepResult& sweep, const std::string& variant,
                     const std::string& path) {
  CM_CHECK(!sweep.rows.empty(), "sweep svg: no rows");
  const double width = 480, height = 320;
  const double ml = 56, mr = 16, mt = 28, mb = 44;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double ymax = 1.0;
  for (const auto& r : sweep.rows)
    ymax = std::max(ymax, r.mean_wer + r.ci95);
  ymax *= 1.1;
  const int kmax = sweep.rows.back().k;

  auto xpos = [&](double k) { return ml + (kmax > 0 ? k / kmax : 0.5) * pw; };
  auto ypos = [&](double wer) { return mt + (1.0 - wer / ymax) * ph; };

  std::ofstream f(path, std::ios::binary);
  CM_CHECK(f.good(), "cannot write sweep svg: ", path);
  char buf[512];
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" "
       "height=\"320\" viewBox=\"0 0 480 320\">\n"
       "<rect width=\"480\" height=\"320\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.0f\" y=\"18\" font-family=\"sans-serif\" "
                "font-size=\"13\">WER vs additional prompted LIDs (%s, l%d, "
                "%s)</text>\n",
                ml, variant.c_str(), sweep.language,
                decode_mode_name(sweep.mode));
  f << buf;
  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n<line x1=\"%.1f\" y1=\"%.1f\" "
                "x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                ml, mt, ml, mt + ph, ml, mt + ph, ml + pw, mt + ph);
  f << buf;
  for (int i = 0; i <= 4; ++i) {
    double wv = ymax * i / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"10\" text-anchor=\"end\">%.1f</text>\n",
                  ml - 6, ypos(wv) + 3, wv);
    f << buf;
  }
  for (const auto& r : sweep.rows) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"10\" text-anchor=\"middle\">%d</text>\n",
                  xpos(r.k), mt + ph + 16, r.k);
    f << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                "font-size=\"11\" text-anchor=\"middle\">additional LID "
                "vectors (k)</text>\n",
                ml + pw / 2, height - 10);
  f << buf;
  // error bars and line
  std::string points;
  for (const auto& r : sweep.rows) {
    double x = xpos(r.k), y0 = ypos(r.mean_wer - r.ci95),
           y1 = ypos(r.mean_wer + r.ci95);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#888\"/>\n",
                  x, y0, x, y1);
    f << buf;
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, ypos(r.mean_wer));
    points += buf;
  }
  f << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" "
       "points=\""
    << points << "\"/>\n";
  for (const auto& r : sweep.rows) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" "
                  "fill=\"#1f6fb2\"/>\n",
                  xpos(r.k), ypos(r.mean_wer));
    f << buf;
  }
  f << "</svg>\n";
}

}  // namespace csvmasr
