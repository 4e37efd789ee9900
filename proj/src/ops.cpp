// Copyright 2026 csvmasr authors
// Primitive op implementations with hand-derived backward passes. Every op
// here is covered by a randomized finite-difference test.
//
// Licensed under the Apache License, Version 2.0

#include "csvmasr/ops.hpp"

#include <cmath>

#include "csvmasr/kernels.hpp"

namespace csvmasr {

namespace {

const kernels::Ops& kx() { return kernels::active(); }

double sigmoid(double x) {
  // Split by sign for stability at large |x|.
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// arithmetic
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  CM_CHECK(a.shape() == b.shape(), "add: shape mismatch ", a.shape().str(),
           " vs ", b.shape().str());
  int n = static_cast<int>(a.shape().size());
  std::vector<double> out(n);
  kx().add(a.value().data(), b.value().data(), out.data(), n);
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      a.shape(), std::move(out), {a, b},
      [pa, pb, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(pa)) kx().axpy(1.0, g.data(), t.grad_acc(pa).data(), n);
        if (t.requires_grad_of(pb)) kx().axpy(1.0, g.data(), t.grad_acc(pb).data(), n);
      },
      "add");
}

Var add_rowvec(Var x, Var b) {
  CM_CHECK(b.rows() == 1 && b.cols() == x.cols(),
           "add_rowvec: bias shape ", b.shape().str(), " vs input ",
           x.shape().str());
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.shape().size());
  for (int i = 0; i < rows; ++i)
    kx().add(x.value().data() + static_cast<int64_t>(i) * cols,
             b.value().data(), out.data() + static_cast<int64_t>(i) * cols,
             cols);
  int px = x.id, pb = b.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, b},
      [px, pb, rows, cols](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(px))
          kx().axpy(1.0, g.data(), t.grad_acc(px).data(), rows * cols);
        if (t.requires_grad_of(pb)) {
          auto& gb = t.grad_acc(pb);
          for (int i = 0; i < rows; ++i)
            kx().axpy(1.0, g.data() + static_cast<int64_t>(i) * cols,
                      gb.data(), cols);
        }
      },
      "add_rowvec");
}

Var add_colvec(Var x, Var c) {
  CM_CHECK(c.cols() == 1 && c.rows() == x.rows(),
           "add_colvec: column shape ", c.shape().str(), " vs input ",
           x.shape().str());
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.shape().size());
  for (int i = 0; i < rows; ++i) {
    double ci = c.value()[i];
    const double* xi = x.value().data() + static_cast<int64_t>(i) * cols;
    double* oi = out.data() + static_cast<int64_t>(i) * cols;
    for (int j = 0; j < cols; ++j) oi[j] = xi[j] + ci;
  }
  int px = x.id, pc = c.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, c},
      [px, pc, rows, cols](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(px))
          kx().axpy(1.0, g.data(), t.grad_acc(px).data(), rows * cols);
        if (t.requires_grad_of(pc)) {
          auto& gc = t.grad_acc(pc);
          for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* gi = g.data() + static_cast<int64_t>(i) * cols;
            for (int j = 0; j < cols; ++j) s += gi[j];
            gc[i] += s;
          }
        }
      },
      "add_colvec");
}

Var sub(Var a, Var b) {
  CM_CHECK(a.shape() == b.shape(), "sub: shape mismatch ", a.shape().str(),
           " vs ", b.shape().str());
  int n = static_cast<int>(a.shape().size());
  std::vector<double> out(n);
  kx().sub(a.value().data(), b.value().data(), out.data(), n);
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      a.shape(), std::move(out), {a, b},
      [pa, pb, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(pa)) kx().axpy(1.0, g.data(), t.grad_acc(pa).data(), n);
        if (t.requires_grad_of(pb)) kx().axpy(-1.0, g.data(), t.grad_acc(pb).data(), n);
      },
      "sub");
}

Var mul(Var a, Var b) {
  CM_CHECK(a.shape() == b.shape(), "mul: shape mismatch ", a.shape().str(),
           " vs ", b.shape().str());
  int n = static_cast<int>(a.shape().size());
  std::vector<double> out(n);
  kx().mul(a.value().data(), b.value().data(), out.data(), n);
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      a.shape(), std::move(out), {a, b},
      [pa, pb, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(pa))
          kx().madd(g.data(), t.value_of(pb).data(), t.grad_acc(pa).data(), n);
        if (t.requires_grad_of(pb))
          kx().madd(g.data(), t.value_of(pa).data(), t.grad_acc(pb).data(), n);
      },
      "mul");
}

Var scale(Var x, double c) {
  int n = static_cast<int>(x.shape().size());
  std::vector<double> out(n);
  kx().scale(c, x.value().data(), out.data(), n);
  int px = x.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x},
      [px, c, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(px)) kx().axpy(c, g.data(), t.grad_acc(px).data(), n);
      },
      "scale");
}

Var scale_rows(Var x, Var w) {
  CM_CHECK(w.cols() == 1 && w.rows() == x.rows(),
           "scale_rows: weight shape ", w.shape().str(), " vs input ",
           x.shape().str());
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.shape().size());
  for (int i = 0; i < rows; ++i)
    kx().scale(w.value()[i], x.value().data() + static_cast<int64_t>(i) * cols,
               out.data() + static_cast<int64_t>(i) * cols, cols);
  int px = x.id, pw = w.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, w},
      [px, pw, rows, cols](Tape& t, int, const std::vector<double>& g) {
        const auto& wv = t.value_of(pw);
        const auto& xv = t.value_of(px);
        if (t.requires_grad_of(px)) {
          auto& gx = t.grad_acc(px);
          for (int i = 0; i < rows; ++i)
            kx().axpy(wv[i], g.data() + static_cast<int64_t>(i) * cols,
                      gx.data() + static_cast<int64_t>(i) * cols, cols);
        }
        if (t.requires_grad_of(pw)) {
          auto& gw = t.grad_acc(pw);
          for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* gi = g.data() + static_cast<int64_t>(i) * cols;
            const double* xi = xv.data() + static_cast<int64_t>(i) * cols;
            for (int j = 0; j < cols; ++j) s += gi[j] * xi[j];
            gw[i] += s;
          }
        }
      },
      "scale_rows");
}

Var scale_all(Var x, Var s) {
  CM_CHECK(s.shape().size() == 1, "scale_all: scale must be 1x1, got ",
           s.shape().str());
  int n = static_cast<int>(x.shape().size());
  std::vector<double> out(n);
  kx().scale(s.value()[0], x.value().data(), out.data(), n);
  int px = x.id, ps = s.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, s},
      [px, ps, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(px))
          kx().axpy(t.value_of(ps)[0], g.data(), t.grad_acc(px).data(), n);
        if (t.requires_grad_of(ps)) {
          const auto& xv = t.value_of(px);
          double acc = 0.0;
          for (int i = 0; i < n; ++i) acc += g[i] * xv[i];
          t.grad_acc(ps)[0] += acc;
        }
      },
      "scale_all");
}

Var matmul(Var a, Var b) {
  CM_CHECK(a.cols() == b.rows(), "matmul: inner dims ", a.shape().str(), " x ",
           b.shape().str());
  int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<int64_t>(m) * n, 0.0);
  kx().matmul_acc(a.value().data(), b.value().data(), out.data(), m, k, n);
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      Shape{m, n}, std::move(out), {a, b},
      [pa, pb, m, k, n](Tape& t, int, const std::vector<double>& g) {
        const auto& av = t.value_of(pa);
        const auto& bv = t.value_of(pb);
        if (t.requires_grad_of(pa)) {
          // dA += G * B^T
          std::vector<double> bt(static_cast<int64_t>(n) * k);
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < n; ++j)
              bt[static_cast<int64_t>(j) * k + i] =
                  bv[static_cast<int64_t>(i) * n + j];
          kx().matmul_acc(g.data(), bt.data(), t.grad_acc(pa).data(), m, n, k);
        }
        if (t.requires_grad_of(pb)) {
          // dB += A^T * G
          std::vector<double> at(static_cast<int64_t>(k) * m);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < k; ++j)
              at[static_cast<int64_t>(j) * m + i] =
                  av[static_cast<int64_t>(i) * k + j];
          kx().matmul_acc(at.data(), g.data(), t.grad_acc(pb).data(), k, m, n);
        }
      },
      "matmul");
}

Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  int px = x.id;
  int n = static_cast<int>(x.shape().size());
  return x.tape->emit(
      Shape{1, 1}, {s}, {x},
      [px, n](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        auto& gx = t.grad_acc(px);
        double g0 = g[0];
        for (int i = 0; i < n; ++i) gx[i] += g0;
      },
      "sum");
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Var transpose(Var x) {
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.shape().size());
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<int64_t>(j) * rows + i] = x.value()[static_cast<int64_t>(i) * cols + j];
  int px = x.id;
  return x.tape->emit(
      Shape{cols, rows}, std::move(out), {x},
      [px, rows, cols](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            gx[static_cast<int64_t>(i) * cols + j] += g[static_cast<int64_t>(j) * rows + i];
      },
      "transpose");
}

Var concat_rows(Var a, Var b) {
  CM_CHECK(a.cols() == b.cols(), "concat_rows: column mismatch ",
           a.shape().str(), " vs ", b.shape().str());
  int ra = a.rows(), rb = b.rows(), cols = a.cols();
  std::vector<double> out;
  out.reserve(static_cast<size_t>((ra + rb)) * cols);
  out.insert(out.end(), a.value().begin(), a.value().end());
  out.insert(out.end(), b.value().begin(), b.value().end());
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      Shape{ra + rb, cols}, std::move(out), {a, b},
      [pa, pb, ra, rb, cols](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(pa))
          kx().axpy(1.0, g.data(), t.grad_acc(pa).data(), ra * cols);
        if (t.requires_grad_of(pb))
          kx().axpy(1.0, g.data() + static_cast<int64_t>(ra) * cols,
                    t.grad_acc(pb).data(), rb * cols);
      },
      "concat_rows");
}

Var concat_cols(Var a, Var b) {
  CM_CHECK(a.rows() == b.rows(), "concat_cols: row mismatch ",
           a.shape().str(), " vs ", b.shape().str());
  int rows = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(static_cast<int64_t>(rows) * (ca + cb));
  for (int i = 0; i < rows; ++i) {
    double* oi = out.data() + static_cast<int64_t>(i) * (ca + cb);
    const double* ai = a.value().data() + static_cast<int64_t>(i) * ca;
    const double* bi = b.value().data() + static_cast<int64_t>(i) * cb;
    for (int j = 0; j < ca; ++j) oi[j] = ai[j];
    for (int j = 0; j < cb; ++j) oi[ca + j] = bi[j];
  }
  int pa = a.id, pb = b.id;
  return a.tape->emit(
      Shape{rows, ca + cb}, std::move(out), {a, b},
      [pa, pb, rows, ca, cb](Tape& t, int, const std::vector<double>& g) {
        for (int i = 0; i < rows; ++i) {
          const double* gi = g.data() + static_cast<int64_t>(i) * (ca + cb);
          if (t.requires_grad_of(pa))
            kx().axpy(1.0, gi, t.grad_acc(pa).data() + static_cast<int64_t>(i) * ca, ca);
          if (t.requires_grad_of(pb))
            kx().axpy(1.0, gi + ca, t.grad_acc(pb).data() + static_cast<int64_t>(i) * cb, cb);
        }
      },
      "concat_cols");
}

Var slice_rows(Var x, int r0, int r1) {
  CM_CHECK(0 <= r0 && r0 < r1 && r1 <= x.rows(), "slice_rows: [", r0, ", ", r1,
           ") out of range for ", x.shape().str());
  int cols = x.cols();
  std::vector<double> out(x.value().begin() + static_cast<int64_t>(r0) * cols,
                          x.value().begin() + static_cast<int64_t>(r1) * cols);
  int px = x.id;
  return x.tape->emit(
      Shape{r1 - r0, cols}, std::move(out), {x},
      [px, r0, r1, cols](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        kx().axpy(1.0, g.data(),
                  t.grad_acc(px).data() + static_cast<int64_t>(r0) * cols,
                  (r1 - r0) * cols);
      },
      "slice_rows");
}

Var slice_cols(Var x, int c0, int c1) {
  CM_CHECK(0 <= c0 && c0 < c1 && c1 <= x.cols(), "slice_cols: [", c0, ", ", c1,
           ") out of range for ", x.shape().str());
  int rows = x.rows(), cols = x.cols(), w = c1 - c0;
  std::vector<double> out(static_cast<int64_t>(rows) * w);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<int64_t>(i) * w + j] =
          x.value()[static_cast<int64_t>(i) * cols + c0 + j];
  int px = x.id;
  return x.tape->emit(
      Shape{rows, w}, std::move(out), {x},
      [px, c0, rows, cols, w](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j)
            gx[static_cast<int64_t>(i) * cols + c0 + j] += g[static_cast<int64_t>(i) * w + j];
      },
      "slice_cols");
}

Var reshape(Var x, Shape s) {
  CM_CHECK(s.size() == x.shape().size(), "reshape: ", x.shape().str(), " to ",
           s.str());
  std::vector<double> out = x.value();
  int px = x.id;
  int n = static_cast<int>(s.size());
  return x.tape->emit(
      s, std::move(out), {x},
      [px, n](Tape& t, int, const std::vector<double>& g) {
        if (t.requires_grad_of(px))
          kx().axpy(1.0, g.data(), t.grad_acc(px).data(), n);
      },
      "reshape");
}

// ---------------------------------------------------------------------------
// nonlinear / normalizing
// ---------------------------------------------------------------------------

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  int rows = x.rows(), cols = x.cols();
  CM_CHECK(gamma.rows() == 1 && gamma.cols() == cols, "layer_norm: gamma ",
           gamma.shape().str(), " vs input ", x.shape().str());
  CM_CHECK(beta.rows() == 1 && beta.cols() == cols, "layer_norm: beta ",
           beta.shape().str(), " vs input ", x.shape().str());
  std::vector<double> out(x.shape().size());
  std::vector<double> xhat(x.shape().size());
  std::vector<double> inv_std(rows);
  for (int i = 0; i < rows; ++i) {
    const double* xi = x.value().data() + static_cast<int64_t>(i) * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xi[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      double d = xi[j] - mean;
      var += d * d;
    }
    var /= cols;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    double* hi = xhat.data() + static_cast<int64_t>(i) * cols;
    double* oi = out.data() + static_cast<int64_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      hi[j] = (xi[j] - mean) * is;
      oi[j] = gamma.value()[j] * hi[j] + beta.value()[j];
    }
  }
  int px = x.id, pg = gamma.id, pb = beta.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, gamma, beta},
      [px, pg, pb, rows, cols, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, int,
                                     const std::vector<double>& g) {
        const auto& gv = t.value_of(pg);
        for (int i = 0; i < rows; ++i) {
          const double* gi = g.data() + static_cast<int64_t>(i) * cols;
          const double* hi = xhat.data() + static_cast<int64_t>(i) * cols;
          if (t.requires_grad_of(pg)) {
            auto& gg = t.grad_acc(pg);
            for (int j = 0; j < cols; ++j) gg[j] += gi[j] * hi[j];
          }
          if (t.requires_grad_of(pb)) {
            auto& gb = t.grad_acc(pb);
            for (int j = 0; j < cols; ++j) gb[j] += gi[j];
          }
          if (t.requires_grad_of(px)) {
            // dxhat = g * gamma; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < cols; ++j) {
              double dh = gi[j] * gv[j];
              m1 += dh;
              m2 += dh * hi[j];
            }
            m1 /= cols;
            m2 /= cols;
            auto& gx = t.grad_acc(px);
            double* gxi = gx.data() + static_cast<int64_t>(i) * cols;
            for (int j = 0; j < cols; ++j) {
              double dh = gi[j] * gv[j];
              gxi[j] += inv_std[i] * (dh - m1 - hi[j] * m2);
            }
          }
        }
      },
      "layer_norm");
}

Var masked_softmax(Var x, const std::vector<uint8_t>& mask) {
  int rows = x.rows(), cols = x.cols();
  bool broadcast = static_cast<int64_t>(mask.size()) == cols;
  CM_CHECK(broadcast || static_cast<int64_t>(mask.size()) == x.shape().size(),
           "masked_softmax: mask size ", mask.size(), " for input ",
           x.shape().str());
  std::vector<double> out(x.shape().size(), 0.0);
  for (int i = 0; i < rows; ++i) {
    const uint8_t* mi = broadcast ? mask.data()
                                  : mask.data() + static_cast<int64_t>(i) * cols;
    const double* xi = x.value().data() + static_cast<int64_t>(i) * cols;
    double* oi = out.data() + static_cast<int64_t>(i) * cols;
    // max over active entries only; inactive logits are never read
    double mx = 0.0;
    bool any = false;
    for (int j = 0; j < cols; ++j) {
      if (!mi[j]) continue;
      if (!any || xi[j] > mx) mx = xi[j];
      any = true;
    }
    CM_CHECK(any, "masked_softmax: row ", i, " has an all-zero mask");
    double denom = 0.0;
    for (int j = 0; j < cols; ++j) {
      if (!mi[j]) continue;
      oi[j] = std::exp(xi[j] - mx);
      denom += oi[j];
    }
    for (int j = 0; j < cols; ++j)
      if (mi[j]) oi[j] /= denom;
  }
  int px = x.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x},
      [px, rows, cols, mask, broadcast](Tape& t, int self,
                                        const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        const auto& p = t.value_of(self);
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < rows; ++i) {
          const uint8_t* mi =
              broadcast ? mask.data() : mask.data() + static_cast<int64_t>(i) * cols;
          const double* pi = p.data() + static_cast<int64_t>(i) * cols;
          const double* gi = g.data() + static_cast<int64_t>(i) * cols;
          double dot = 0.0;
          for (int j = 0; j < cols; ++j)
            if (mi[j]) dot += gi[j] * pi[j];
          double* gxi = gx.data() + static_cast<int64_t>(i) * cols;
          for (int j = 0; j < cols; ++j)
            if (mi[j]) gxi[j] += pi[j] * (gi[j] - dot);
        }
      },
      "masked_softmax");
}

Var softmax_rows(Var x) {
  return masked_softmax(x, std::vector<uint8_t>(x.cols(), 1));
}

Var logsumexp_rows(Var x) {
  int rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows);
  for (int i = 0; i < rows; ++i) {
    const double* xi = x.value().data() + static_cast<int64_t>(i) * cols;
    double mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += std::exp(xi[j] - mx);
    out[i] = mx + std::log(s);
  }
  int px = x.id;
  return x.tape->emit(
      Shape{rows, 1}, std::move(out), {x},
      [px, rows, cols](Tape& t, int self, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        const auto& xv = t.value_of(px);
        const auto& lse = t.value_of(self);
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < rows; ++i) {
          const double* xi = xv.data() + static_cast<int64_t>(i) * cols;
          double* gxi = gx.data() + static_cast<int64_t>(i) * cols;
          for (int j = 0; j < cols; ++j)
            gxi[j] += g[i] * std::exp(xi[j] - lse[i]);
        }
      },
      "logsumexp");
}

Var log_softmax_rows(Var x) {
  return add_colvec(x, scale(logsumexp_rows(x), -1.0));
}

Var swish(Var x) {
  int n = static_cast<int>(x.shape().size());
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double v = x.value()[i];
    out[i] = v * sigmoid(v);
  }
  int px = x.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x},
      [px, n](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        const auto& xv = t.value_of(px);
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < n; ++i) {
          double s = sigmoid(xv[i]);
          gx[i] += g[i] * (s * (1.0 + xv[i] * (1.0 - s)));
        }
      },
      "swish");
}

Var glu_rows(Var x) {
  int rows = x.rows(), cols = x.cols();
  CM_CHECK(cols % 2 == 0, "glu: odd column count ", cols);
  int half = cols / 2;
  std::vector<double> out(static_cast<int64_t>(rows) * half);
  for (int i = 0; i < rows; ++i) {
    const double* xi = x.value().data() + static_cast<int64_t>(i) * cols;
    double* oi = out.data() + static_cast<int64_t>(i) * half;
    for (int j = 0; j < half; ++j) oi[j] = xi[j] * sigmoid(xi[half + j]);
  }
  int px = x.id;
  return x.tape->emit(
      Shape{rows, half}, std::move(out), {x},
      [px, rows, cols, half](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(px)) return;
        const auto& xv = t.value_of(px);
        auto& gx = t.grad_acc(px);
        for (int i = 0; i < rows; ++i) {
          const double* xi = xv.data() + static_cast<int64_t>(i) * cols;
          const double* gi = g.data() + static_cast<int64_t>(i) * half;
          double* gxi = gx.data() + static_cast<int64_t>(i) * cols;
          for (int j = 0; j < half; ++j) {
            double s = sigmoid(xi[half + j]);
            gxi[j] += gi[j] * s;
            gxi[half + j] += gi[j] * xi[j] * s * (1.0 - s);
          }
        }
      },
      "glu");
}

Var conv1d_depthwise(Var x, Var w, Var b) {
  int T = x.rows(), C = x.cols(), K = w.rows();
  CM_CHECK(w.cols() == C, "conv1d: kernel channels ", w.shape().str(),
           " vs input ", x.shape().str());
  CM_CHECK(K % 2 == 1, "conv1d: kernel size must be odd, got ", K);
  CM_CHECK(b.rows() == 1 && b.cols() == C, "conv1d: bias shape ",
           b.shape().str());
  int P = (K - 1) / 2;
  std::vector<double> out(static_cast<int64_t>(T) * C);
  for (int t0 = 0; t0 < T; ++t0) {
    double* ot = out.data() + static_cast<int64_t>(t0) * C;
    for (int c = 0; c < C; ++c) ot[c] = b.value()[c];
    for (int k = 0; k < K; ++k) {
      int u = t0 + k - P;
      if (u < 0 || u >= T) continue;
      kx().madd(w.value().data() + static_cast<int64_t>(k) * C,
                x.value().data() + static_cast<int64_t>(u) * C, ot, C);
    }
  }
  int px = x.id, pw = w.id, pb = b.id;
  return x.tape->emit(
      x.shape(), std::move(out), {x, w, b},
      [px, pw, pb, T, C, K, P](Tape& t, int, const std::vector<double>& g) {
        const auto& xv = t.value_of(px);
        const auto& wv = t.value_of(pw);
        if (t.requires_grad_of(pb)) {
          auto& gb = t.grad_acc(pb);
          for (int t0 = 0; t0 < T; ++t0)
            kx().axpy(1.0, g.data() + static_cast<int64_t>(t0) * C, gb.data(), C);
        }
        if (t.requires_grad_of(pw)) {
          auto& gw = t.grad_acc(pw);
          for (int k = 0; k < K; ++k) {
            double* gwk = gw.data() + static_cast<int64_t>(k) * C;
            for (int t0 = 0; t0 < T; ++t0) {
              int u = t0 + k - P;
              if (u < 0 || u >= T) continue;
              kx().madd(g.data() + static_cast<int64_t>(t0) * C,
                        xv.data() + static_cast<int64_t>(u) * C, gwk, C);
            }
          }
        }
        if (t.requires_grad_of(px)) {
          auto& gx = t.grad_acc(px);
          for (int u = 0; u < T; ++u) {
            double* gxu = gx.data() + static_cast<int64_t>(u) * C;
            for (int k = 0; k < K; ++k) {
              int t0 = u - k + P;
              if (t0 < 0 || t0 >= T) continue;
              kx().madd(wv.data() + static_cast<int64_t>(k) * C,
                        g.data() + static_cast<int64_t>(t0) * C, gxu, C);
            }
          }
        }
      },
      "conv1d_depthwise");
}

// ---------------------------------------------------------------------------
// indexed
// ---------------------------------------------------------------------------

Var gather_rows(Var table, const std::vector<int>& ids) {
  int rows = table.rows(), cols = table.cols();
  CM_CHECK(!ids.empty(), "gather_rows: empty index list");
  int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<int64_t>(n) * cols);
  for (int i = 0; i < n; ++i) {
    CM_CHECK(0 <= ids[i] && ids[i] < rows, "gather_rows: index ", ids[i],
             " out of range [0, ", rows, ")");
    const double* src = table.value().data() + static_cast<int64_t>(ids[i]) * cols;
    double* dst = out.data() + static_cast<int64_t>(i) * cols;
    for (int j = 0; j < cols; ++j) dst[j] = src[j];
  }
  int pt = table.id;
  return table.tape->emit(
      Shape{n, cols}, std::move(out), {table},
      [pt, ids, n, cols](Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(pt)) return;
        auto& gt = t.grad_acc(pt);
        for (int i = 0; i < n; ++i)
          kx().axpy(1.0, g.data() + static_cast<int64_t>(i) * cols,
                    gt.data() + static_cast<int64_t>(ids[i]) * cols, cols);
      },
      "gather_rows");
}

Var cross_entropy_mean(Var logits, const std::vector<int>& ids) {
  int rows = logits.rows(), cols = logits.cols();
  CM_CHECK(static_cast<int>(ids.size()) == rows,
           "cross_entropy: ", ids.size(), " targets for ", rows, " rows");
  double loss = 0.0;
  std::vector<double> lse(rows);
  for (int i = 0; i < rows; ++i) {
    CM_CHECK(0 <= ids[i] && ids[i] < cols, "cross_entropy: target ", ids[i],
             " out of range [0, ", cols, ")");
    const double* xi = logits.value().data() + static_cast<int64_t>(i) * cols;
    double mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += std::exp(xi[j] - mx);
    lse[i] = mx + std::log(s);
    loss += lse[i] - xi[ids[i]];
  }
  loss /= rows;
  int pl = logits.id;
  return logits.tape->emit(
      Shape{1, 1}, {loss}, {logits},
      [pl, ids, rows, cols, lse = std::move(lse)](
          Tape& t, int, const std::vector<double>& g) {
        if (!t.requires_grad_of(pl)) return;
        const auto& xv = t.value_of(pl);
        auto& gx = t.grad_acc(pl);
        double scale = g[0] / rows;
        for (int i = 0; i < rows; ++i) {
          const double* xi = xv.data() + static_cast<int64_t>(i) * cols;
          double* gxi = gx.data() + static_cast<int64_t>(i) * cols;
          for (int j = 0; j < cols; ++j)
            gxi[j] += scale * std::exp(xi[j] - lse[i]);
          gxi[ids[i]] -= scale;
        }
      },
      "cross_entropy");
}

}  // namespace csvmasr
