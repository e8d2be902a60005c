#include "spikegen/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spikegen {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

// A(m,k) * B(k,n) += into C(m,n). Row-parallel; each output row is produced
// by exactly one thread in a fixed order, so results are thread-count
// independent.
void matmul_acc(const float* a, const float* b, float* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1)
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// A(m,k) * B^T where B is (n,k): C(m,n) += A * B^T.
void matmul_bt_acc(const float* a, const float* b, float* c, int m, int k,
                   int n) {
#pragma omp parallel for schedule(static) if (m > 1)
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<size_t>(j) * k;
      // Eight independent lanes fix the accumulation order while letting the
      // compiler vectorize the dot product.
      float lane[8] = {};
      int p = 0;
      for (; p + 8 <= k; p += 8)
        for (int l = 0; l < 8; ++l) lane[l] += arow[p + l] * brow[p + l];
      float acc = ((lane[0] + lane[4]) + (lane[2] + lane[6])) +
                  ((lane[1] + lane[5]) + (lane[3] + lane[7]));
      for (; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// A^T * B where A is (k,m), B is (k,n): C(m,n) += A^T * B.
void matmul_at_acc(const float* a, const float* b, float* c, int m, int k,
                   int n) {
#pragma omp parallel for schedule(static) if (m > 1)
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = a[static_cast<size_t>(p) * m + i];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void im2col(const float* x, int c, int h, int w, int kh, int kw, int stride,
            int pad, int ho, int wo, float* col) {
  // col is (c*kh*kw, ho*wo)
  for (int ci = 0; ci < c; ++ci)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        float* dst = col + (static_cast<size_t>(ci) * kh * kw + ki * kw + kj) *
                               (static_cast<size_t>(ho) * wo);
        for (int oi = 0; oi < ho; ++oi) {
          int ii = oi * stride - pad + ki;
          for (int oj = 0; oj < wo; ++oj) {
            int jj = oj * stride - pad + kj;
            *dst++ = (ii >= 0 && ii < h && jj >= 0 && jj < w)
                         ? x[(static_cast<size_t>(ci) * h + ii) * w + jj]
                         : 0.0f;
          }
        }
      }
}

void col2im_acc(const float* col, int c, int h, int w, int kh, int kw,
                int stride, int pad, int ho, int wo, float* x) {
  for (int ci = 0; ci < c; ++ci)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        const float* src = col + (static_cast<size_t>(ci) * kh * kw + ki * kw +
                                  kj) *
                                     (static_cast<size_t>(ho) * wo);
        for (int oi = 0; oi < ho; ++oi) {
          int ii = oi * stride - pad + ki;
          for (int oj = 0; oj < wo; ++oj) {
            int jj = oj * stride - pad + kj;
            float v = *src++;
            if (ii >= 0 && ii < h && jj >= 0 && jj < w)
              x[(static_cast<size_t>(ci) * h + ii) * w + jj] += v;
          }
        }
      }
}

using UnaryFwd = float (*)(float);

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> out(a.data().size());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor ac = a, bc = b;
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [ac, bc](TensorImpl& o) mutable {
                          if (ac.requires_grad()) {
                            auto& g = ac.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i];
                          }
                          if (bc.requires_grad()) {
                            auto& g = bc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i];
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<float> out(a.data().size());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor ac = a, bc = b;
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [ac, bc](TensorImpl& o) mutable {
                          if (ac.requires_grad()) {
                            auto& g = ac.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i];
                          }
                          if (bc.requires_grad()) {
                            auto& g = bc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] -= o.grad[i];
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> out(a.data().size());
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor ac = a, bc = b;
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [ac, bc](TensorImpl& o) mutable {
                          if (ac.requires_grad()) {
                            auto& g = ac.grad();
                            const auto& bv = bc.data();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i] * bv[i];
                          }
                          if (bc.requires_grad()) {
                            auto& g = bc.grad();
                            const auto& av = ac.data();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i] * av[i];
                          }
                        });
}

Tensor add_scalar(const Tensor& a, float c) {
  std::vector<float> out(a.data().size());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + c;
  Tensor ac = a;
  return make_op_result(a.shape(), std::move(out), {a},
                        [ac](TensorImpl& o) mutable {
                          auto& g = ac.grad();
                          for (size_t i = 0; i < g.size(); ++i)
                            g[i] += o.grad[i];
                        });
}

Tensor mul_scalar(const Tensor& a, float c) {
  std::vector<float> out(a.data().size());
  const auto& ad = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * c;
  Tensor ac = a;
  return make_op_result(a.shape(), std::move(out), {a},
                        [ac, c](TensorImpl& o) mutable {
                          auto& g = ac.grad();
                          for (size_t i = 0; i < g.size(); ++i)
                            g[i] += o.grad[i] * c;
                        });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1)
    throw std::invalid_argument("scale_by: scale must be a single element, got " +
                                shape_str(s.shape()));
  const float sv = s.data()[0];
  std::vector<float> out(x.data().size());
  const auto& xd = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * sv;
  Tensor xc = x, sc = s;
  return make_op_result(x.shape(), std::move(out), {x, s},
                        [xc, sc, sv](TensorImpl& o) mutable {
                          if (xc.requires_grad()) {
                            auto& g = xc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i] * sv;
                          }
                          if (sc.requires_grad()) {
                            const auto& xv = xc.data();
                            float acc = 0.0f;
                            for (size_t i = 0; i < xv.size(); ++i)
                              acc += o.grad[i] * xv[i];
                            sc.grad()[0] += acc;
                          }
                        });
}

namespace {

Tensor unary_op(const Tensor& x, UnaryFwd f,
                std::function<float(float y, float x)> dfn) {
  std::vector<float> out(x.data().size());
  const auto& xd = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  Tensor xc = x;
  std::vector<float> saved = out;
  return make_op_result(
      x.shape(), std::move(out), {x},
      [xc, saved = std::move(saved), dfn](TensorImpl& o) mutable {
        auto& g = xc.grad();
        const auto& xv = xc.data();
        for (size_t i = 0; i < g.size(); ++i)
          g[i] += o.grad[i] * dfn(saved[i], xv[i]);
      });
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](float y, float) { return y * (1.0f - y); });
}

Tensor exp(const Tensor& x) {
  return unary_op(x, [](float v) { return std::exp(v); },
                  [](float y, float) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(x, [](float v) { return std::log(v); },
                  [](float, float xv) { return 1.0f / xv; });
}

Tensor clamp01(const Tensor& x) {
  return unary_op(
      x,
      [](float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); },
      [](float, float xv) { return (xv > 0.0f && xv < 1.0f) ? 1.0f : 0.0f; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
  float acc = 0.0f;
  for (float v : x.data()) acc += v;
  Tensor xc = x;
  return make_op_result({1}, {acc}, {x}, [xc](TensorImpl& o) mutable {
    auto& g = xc.grad();
    const float up = o.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

Tensor mean(const Tensor& x) {
  const float inv = 1.0f / static_cast<float>(x.numel());
  float acc = 0.0f;
  for (float v : x.data()) acc += v;
  acc *= inv;
  Tensor xc = x;
  return make_op_result({1}, {acc}, {x}, [xc, inv](TensorImpl& o) mutable {
    auto& g = xc.grad();
    const float up = o.grad[0] * inv;
    for (size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  const float inv = 1.0f / static_cast<float>(a.numel());
  const auto& ad = a.data();
  const auto& bd = b.data();
  float acc = 0.0f;
  for (size_t i = 0; i < ad.size(); ++i) {
    float d = ad[i] - bd[i];
    acc += d * d;
  }
  acc *= inv;
  Tensor ac = a, bc = b;
  return make_op_result({1}, {acc}, {a, b},
                        [ac, bc, inv](TensorImpl& o) mutable {
                          const float up = o.grad[0] * 2.0f * inv;
                          const auto& av = ac.data();
                          const auto& bv = bc.data();
                          if (ac.requires_grad()) {
                            auto& g = ac.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += up * (av[i] - bv[i]);
                          }
                          if (bc.requires_grad()) {
                            auto& g = bc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] -= up * (av[i] - bv[i]);
                          }
                        });
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(static_cast<size_t>(m) * n, 0.0f);
  matmul_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  Tensor ac = a, bc = b;
  return make_op_result(
      {m, n}, std::move(out), {a, b}, [ac, bc, m, k, n](TensorImpl& o) mutable {
        if (ac.requires_grad())  // dA = dC * B^T
          matmul_bt_acc(o.grad.data(), bc.data().data(), ac.grad().data(), m, n,
                        k);
        if (bc.requires_grad())  // dB = A^T * dC
          matmul_at_acc(ac.data().data(), o.grad.data(), bc.grad().data(), k, m,
                        n);
      });
}

// ---- convolutions ----------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  if (x.shape().size() != 4 || w.shape().size() != 4 || x.dim(1) != w.dim(1))
    throw std::invalid_argument("conv2d: incompatible shapes x=" +
                                shape_str(x.shape()) + " w=" +
                                shape_str(w.shape()));
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0)
    throw std::invalid_argument("conv2d: empty output for input " +
                                shape_str(x.shape()));
  if (b.defined() && (b.shape().size() != 1 || b.dim(0) != co))
    throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape()) +
                                " does not match " + std::to_string(co) +
                                " output channels");
  const size_t colsz = static_cast<size_t>(ci) * kh * kw * ho * wo;
  const size_t osz = static_cast<size_t>(co) * ho * wo;
  std::vector<float> out(static_cast<size_t>(n) * osz, 0.0f);
  const float* bias = b.defined() ? b.data().data() : nullptr;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<float> col(colsz);
    im2col(x.data().data() + static_cast<size_t>(i) * ci * h * wd, ci, h, wd,
           kh, kw, stride, pad, ho, wo, col.data());
    float* y = out.data() + static_cast<size_t>(i) * osz;
    matmul_acc(w.data().data(), col.data(), y, co, ci * kh * kw, ho * wo);
    if (bias)
      for (int c = 0; c < co; ++c)
        for (int p = 0; p < ho * wo; ++p)
          y[static_cast<size_t>(c) * ho * wo + p] += bias[c];
  }
  Tensor xc = x, wc = w, bcap = b;
  return make_op_result(
      {n, co, ho, wo}, std::move(out), {x, w, b},
      [xc, wc, bcap, n, ci, h, wd, co, kh, kw, ho, wo, stride, pad,
       colsz](TensorImpl& o) mutable {
        const int kdim = ci * kh * kw;
        const size_t osz = static_cast<size_t>(co) * ho * wo;
        const bool need_x = xc.requires_grad();
        const bool need_w = wc.requires_grad();
        // Per-sample weight-gradient partials, reduced serially afterwards
        // so the result does not depend on the thread count.
        std::vector<float> wpart;
        if (need_w)
          wpart.assign(static_cast<size_t>(n) * co * kdim, 0.0f);
        if (need_x) xc.grad();
        if (need_w) wc.grad();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
          std::vector<float> col(colsz);
          const float* dy = o.grad.data() + static_cast<size_t>(i) * osz;
          if (need_w) {
            im2col(xc.data().data() + static_cast<size_t>(i) * ci * h * wd, ci,
                   h, wd, kh, kw, stride, pad, ho, wo, col.data());
            // dW_i = dY * col^T
            matmul_bt_acc(dy, col.data(),
                          wpart.data() + static_cast<size_t>(i) * co * kdim, co,
                          ho * wo, kdim);
          }
          if (need_x) {
            std::fill(col.begin(), col.end(), 0.0f);
            // dcol = W^T * dY
            matmul_at_acc(wc.data().data(), dy, col.data(), kdim, co, ho * wo);
            col2im_acc(col.data(), ci, h, wd, kh, kw, stride, pad, ho, wo,
                       xc.grad().data() + static_cast<size_t>(i) * ci * h * wd);
          }
        }
        if (need_w) {
          auto& wg = wc.grad();
          for (int i = 0; i < n; ++i) {
            const float* p = wpart.data() + static_cast<size_t>(i) * co * kdim;
            for (size_t j = 0; j < wg.size(); ++j) wg[j] += p[j];
          }
        }
        if (bcap.defined() && bcap.requires_grad()) {
          auto& bg = bcap.grad();
          for (int i = 0; i < n; ++i)
            for (int c = 0; c < co; ++c) {
              const float* dy =
                  o.grad.data() + static_cast<size_t>(i) * osz +
                  static_cast<size_t>(c) * ho * wo;
              float acc = 0.0f;
              for (int p = 0; p < ho * wo; ++p) acc += dy[p];
              bg[c] += acc;
            }
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad) {
  if (x.shape().size() != 4 || w.shape().size() != 4 || x.dim(1) != w.dim(0))
    throw std::invalid_argument("conv_transpose2d: incompatible shapes x=" +
                                shape_str(x.shape()) + " w=" +
                                shape_str(w.shape()));
  const int n = x.dim(0), ci = x.dim(1), hi = x.dim(2), wi = x.dim(3);
  const int co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int ho = (hi - 1) * stride - 2 * pad + kh;
  const int wo = (wi - 1) * stride - 2 * pad + kw;
  if (ho <= 0 || wo <= 0)
    throw std::invalid_argument("conv_transpose2d: empty output for input " +
                                shape_str(x.shape()));
  if (b.defined() && (b.shape().size() != 1 || b.dim(0) != co))
    throw std::invalid_argument("conv_transpose2d: bias shape " +
                                shape_str(b.shape()) + " does not match " +
                                std::to_string(co) + " output channels");
  const int kdim = co * kh * kw;
  const size_t colsz = static_cast<size_t>(kdim) * hi * wi;
  const size_t osz = static_cast<size_t>(co) * ho * wo;
  std::vector<float> out(static_cast<size_t>(n) * osz, 0.0f);
  const float* bias = b.defined() ? b.data().data() : nullptr;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<float> col(colsz, 0.0f);
    // col = W^T * X  with W as (ci, kdim), X as (ci, hi*wi)
    matmul_at_acc(w.data().data(),
                  x.data().data() + static_cast<size_t>(i) * ci * hi * wi,
                  col.data(), kdim, ci, hi * wi);
    float* y = out.data() + static_cast<size_t>(i) * osz;
    // scatter: im2col geometry of the *output* image
    col2im_acc(col.data(), co, ho, wo, kh, kw, stride, pad, hi, wi, y);
    if (bias)
      for (int c = 0; c < co; ++c)
        for (int p = 0; p < ho * wo; ++p)
          y[static_cast<size_t>(c) * ho * wo + p] += bias[c];
  }
  Tensor xc = x, wc = w, bcap = b;
  return make_op_result(
      {n, co, ho, wo}, std::move(out), {x, w, b},
      [xc, wc, bcap, n, ci, hi, wi, co, kh, kw, ho, wo, stride, pad, kdim,
       colsz](TensorImpl& o) mutable {
        const size_t osz = static_cast<size_t>(co) * ho * wo;
        const bool need_x = xc.requires_grad();
        const bool need_w = wc.requires_grad();
        std::vector<float> wpart;
        if (need_w)
          wpart.assign(static_cast<size_t>(n) * ci * kdim, 0.0f);
        if (need_x) xc.grad();
        if (need_w) wc.grad();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
          std::vector<float> dcol(colsz);
          im2col(o.grad.data() + static_cast<size_t>(i) * osz, co, ho, wo, kh,
                 kw, stride, pad, hi, wi, dcol.data());
          if (need_x)  // dX = W * dcol
            matmul_acc(wc.data().data(), dcol.data(),
                       xc.grad().data() + static_cast<size_t>(i) * ci * hi * wi,
                       ci, kdim, hi * wi);
          if (need_w)  // dW_i = X * dcol^T
            matmul_bt_acc(
                xc.data().data() + static_cast<size_t>(i) * ci * hi * wi,
                dcol.data(), wpart.data() + static_cast<size_t>(i) * ci * kdim,
                ci, hi * wi, kdim);
        }
        if (need_w) {
          auto& wg = wc.grad();
          for (int i = 0; i < n; ++i) {
            const float* p = wpart.data() + static_cast<size_t>(i) * ci * kdim;
            for (size_t j = 0; j < wg.size(); ++j) wg[j] += p[j];
          }
        }
        if (bcap.defined() && bcap.requires_grad()) {
          auto& bg = bcap.grad();
          for (int i = 0; i < n; ++i)
            for (int c = 0; c < co; ++c) {
              const float* dy =
                  o.grad.data() + static_cast<size_t>(i) * osz +
                  static_cast<size_t>(c) * ho * wo;
              float acc = 0.0f;
              for (int p = 0; p < ho * wo; ++p) acc += dy[p];
              bg[c] += acc;
            }
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.shape().size() != 4 || b.shape().size() != 1 || x.dim(1) != b.dim(0))
    throw std::invalid_argument("add_channel_bias: x=" + shape_str(x.shape()) +
                                " b=" + shape_str(b.shape()));
  const int n = x.dim(0), c = x.dim(1);
  const int sp = x.dim(2) * x.dim(3);
  std::vector<float> out(x.data().size());
  const auto& xd = x.data();
  const auto& bd = b.data();
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(i) * c + ch) * sp;
      for (int p = 0; p < sp; ++p) out[base + p] = xd[base + p] + bd[ch];
    }
  Tensor xc = x, bc = b;
  return make_op_result(x.shape(), std::move(out), {x, b},
                        [xc, bc, n, c, sp](TensorImpl& o) mutable {
                          if (xc.requires_grad()) {
                            auto& g = xc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i];
                          }
                          if (bc.requires_grad()) {
                            auto& g = bc.grad();
                            for (int i = 0; i < n; ++i)
                              for (int ch = 0; ch < c; ++ch) {
                                const size_t base =
                                    (static_cast<size_t>(i) * c + ch) * sp;
                                float acc = 0.0f;
                                for (int p = 0; p < sp; ++p)
                                  acc += o.grad[base + p];
                                g[ch] += acc;
                              }
                          }
                        });
}

// ---- softmax / categorical -------------------------------------------------

Tensor softmax(const Tensor& x) {
  if (x.shape().size() != 1)
    throw std::invalid_argument("softmax: expects 1-D, got " +
                                shape_str(x.shape()));
  const auto& xd = x.data();
  float mx = xd[0];
  for (float v : xd) mx = std::max(mx, v);
  std::vector<float> out(xd.size());
  float z = 0.0f;
  for (size_t i = 0; i < xd.size(); ++i) {
    out[i] = std::exp(xd[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  Tensor xc = x;
  std::vector<float> y = out;
  return make_op_result(x.shape(), std::move(out), {x},
                        [xc, y = std::move(y)](TensorImpl& o) mutable {
                          float dot = 0.0f;
                          for (size_t i = 0; i < y.size(); ++i)
                            dot += o.grad[i] * y[i];
                          auto& g = xc.grad();
                          for (size_t i = 0; i < y.size(); ++i)
                            g[i] += y[i] * (o.grad[i] - dot);
                        });
}

Tensor log_softmax_channels(const Tensor& x) {
  if (x.shape().size() != 4)
    throw std::invalid_argument("log_softmax_channels: expects (N,C,H,W), got " +
                                shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), sp = x.dim(2) * x.dim(3);
  const auto& xd = x.data();
  std::vector<float> out(xd.size());
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < sp; ++p) {
      const size_t base = static_cast<size_t>(i) * c * sp + p;
      float mx = xd[base];
      for (int ch = 1; ch < c; ++ch)
        mx = std::max(mx, xd[base + static_cast<size_t>(ch) * sp]);
      float z = 0.0f;
      for (int ch = 0; ch < c; ++ch)
        z += std::exp(xd[base + static_cast<size_t>(ch) * sp] - mx);
      const float lz = mx + std::log(z);
      for (int ch = 0; ch < c; ++ch)
        out[base + static_cast<size_t>(ch) * sp] =
            xd[base + static_cast<size_t>(ch) * sp] - lz;
    }
  Tensor xc = x;
  std::vector<float> saved = out;
  return make_op_result(
      x.shape(), std::move(out), {x},
      [xc, saved = std::move(saved), n, c, sp](TensorImpl& o) mutable {
        auto& g = xc.grad();
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < sp; ++p) {
            const size_t base = static_cast<size_t>(i) * c * sp + p;
            float gsum = 0.0f;
            for (int ch = 0; ch < c; ++ch)
              gsum += o.grad[base + static_cast<size_t>(ch) * sp];
            for (int ch = 0; ch < c; ++ch) {
              const size_t k = base + static_cast<size_t>(ch) * sp;
              g[k] += o.grad[k] - std::exp(saved[k]) * gsum;
            }
          }
      });
}

Tensor gather_channel(const Tensor& x, const std::vector<int>& idx) {
  if (x.shape().size() != 4)
    throw std::invalid_argument("gather_channel: expects (N,C,H,W), got " +
                                shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int sp = h * w;
  if (static_cast<int>(idx.size()) != n * sp)
    throw std::invalid_argument("gather_channel: index count " +
                                std::to_string(idx.size()) + " != " +
                                std::to_string(n * sp));
  const auto& xd = x.data();
  std::vector<float> out(static_cast<size_t>(n) * sp);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < sp; ++p) {
      const int ch = idx[static_cast<size_t>(i) * sp + p];
      if (ch < 0 || ch >= c)
        throw std::out_of_range("gather_channel: index " + std::to_string(ch) +
                                " outside [0," + std::to_string(c - 1) + "]");
      out[static_cast<size_t>(i) * sp + p] =
          xd[(static_cast<size_t>(i) * c + ch) * sp + p];
    }
  Tensor xc = x;
  return make_op_result(
      {n, h, w}, std::move(out), {x}, [xc, idx, n, c, sp](TensorImpl& o) mutable {
        auto& g = xc.grad();
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < sp; ++p) {
            const int ch = idx[static_cast<size_t>(i) * sp + p];
            g[(static_cast<size_t>(i) * c + ch) * sp + p] +=
                o.grad[static_cast<size_t>(i) * sp + p];
          }
      });
}

Tensor embed_spatial(const Tensor& table, const std::vector<int>& tokens, int n,
                     int h, int w) {
  if (table.shape().size() != 2)
    throw std::invalid_argument("embed_spatial: table must be (K,C), got " +
                                shape_str(table.shape()));
  const int k = table.dim(0), c = table.dim(1);
  const int sp = h * w;
  if (static_cast<int>(tokens.size()) != n * sp)
    throw std::invalid_argument("embed_spatial: token count " +
                                std::to_string(tokens.size()) + " != " +
                                std::to_string(n * sp));
  const auto& td = table.data();
  std::vector<float> out(static_cast<size_t>(n) * c * sp);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < sp; ++p) {
      const int tok = tokens[static_cast<size_t>(i) * sp + p];
      if (tok < 0 || tok >= k)
        throw std::out_of_range("embed_spatial: token " + std::to_string(tok) +
                                " outside [0," + std::to_string(k - 1) + "]");
      for (int ch = 0; ch < c; ++ch)
        out[(static_cast<size_t>(i) * c + ch) * sp + p] =
            td[static_cast<size_t>(tok) * c + ch];
    }
  Tensor tc = table;
  return make_op_result(
      {n, c, h, w}, std::move(out), {table},
      [tc, tokens, n, c, sp](TensorImpl& o) mutable {
        auto& g = tc.grad();
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < sp; ++p) {
            const int tok = tokens[static_cast<size_t>(i) * sp + p];
            for (int ch = 0; ch < c; ++ch)
              g[static_cast<size_t>(tok) * c + ch] +=
                  o.grad[(static_cast<size_t>(i) * c + ch) * sp + p];
          }
      });
}

Tensor one_hot(const std::vector<int>& idx, int k) {
  std::vector<float> out(idx.size() * static_cast<size_t>(k), 0.0f);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= k)
      throw std::out_of_range("one_hot: index " + std::to_string(idx[i]) +
                              " outside [0," + std::to_string(k - 1) + "]");
    out[i * static_cast<size_t>(k) + idx[i]] = 1.0f;
  }
  return Tensor::from({static_cast<int>(idx.size()), k}, std::move(out));
}

// ---- custom gradient -------------------------------------------------------

Tensor apply_custom(const Tensor& x, const CustomGradFn& f) {
  const auto& xd = x.data();
  std::vector<float> out(xd.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f.forward(xd[i]);
  Tensor xc = x;
  auto bwd = f.backward;
  return make_op_result(x.shape(), std::move(out), {x},
                        [xc, bwd](TensorImpl& o) mutable {
                          auto& g = xc.grad();
                          const auto& xv = xc.data();
                          for (size_t i = 0; i < g.size(); ++i)
                            g[i] += o.grad[i] * bwd(xv[i]);
                        });
}

float surrogate_grad(float x, float alpha) {
  const float s = 1.5707963267948966f * alpha * x;  // pi/2 * alpha * x
  return alpha / (2.0f * (1.0f + s * s));
}

Tensor spike_surrogate(const Tensor& x, float alpha) {
  CustomGradFn f{
      [](float v) { return v >= 0.0f ? 1.0f : 0.0f; },
      [alpha](float v) { return surrogate_grad(v, alpha); },
  };
  return apply_custom(x, f);
}

Tensor straight_through(const Tensor& q, const Tensor& e) {
  check_same_shape(q, e, "straight_through");
  return add(e, sub(q, e).detach());
}

// ---- fused neuron kernels --------------------------------------------------

Tensor lif_charge(const Tensor& x, const Tensor& v, float tau, float v_reset) {
  check_same_shape(x, v, "lif_charge");
  const float inv_tau = 1.0f / tau;
  const auto& xd = x.data();
  const auto& vd = v.data();
  std::vector<float> out(xd.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const float leak = vd[i] + (-v_reset);
    out[i] = vd[i] + ((xd[i] - leak) * inv_tau);
  }
  Tensor xc = x, vc = v;
  return make_op_result(x.shape(), std::move(out), {x, v},
                        [xc, vc, inv_tau](TensorImpl& o) mutable {
                          if (xc.requires_grad()) {
                            auto& g = xc.grad();
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i] * inv_tau;
                          }
                          if (vc.requires_grad()) {
                            auto& g = vc.grad();
                            const float keep = 1.0f - inv_tau;
                            for (size_t i = 0; i < g.size(); ++i)
                              g[i] += o.grad[i] * keep;
                          }
                        });
}

Tensor lif_fire(const Tensor& h, float v_th, float alpha) {
  const auto& hd = h.data();
  std::vector<float> out(hd.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (hd[i] + (-v_th)) >= 0.0f ? 1.0f : 0.0f;
  Tensor hc = h;
  return make_op_result(h.shape(), std::move(out), {h},
                        [hc, v_th, alpha](TensorImpl& o) mutable {
                          auto& g = hc.grad();
                          const auto& hv = hc.data();
                          for (size_t i = 0; i < g.size(); ++i)
                            g[i] += o.grad[i] *
                                    surrogate_grad(hv[i] - v_th, alpha);
                        });
}

Tensor lif_reset(const Tensor& h, const Tensor& s, float v_reset,
                 bool detach_reset) {
  check_same_shape(h, s, "lif_reset");
  const auto& hd = h.data();
  const auto& sd = s.data();
  std::vector<float> out(hd.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const float keep = (sd[i] * -1.0f) + 1.0f;
    out[i] = hd[i] * keep + sd[i] * v_reset;
  }
  Tensor hc = h, sc = s;
  std::vector<Tensor> parents =
      detach_reset ? std::vector<Tensor>{h} : std::vector<Tensor>{h, s};
  return make_op_result(
      h.shape(), std::move(out), std::move(parents),
      [hc, sc, v_reset, detach_reset](TensorImpl& o) mutable {
        if (hc.requires_grad()) {
          auto& g = hc.grad();
          const auto& sv = sc.data();
          for (size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * (1.0f - sv[i]);
        }
        if (!detach_reset && sc.requires_grad()) {
          auto& g = sc.grad();
          const auto& hv = hc.data();
          for (size_t i = 0; i < g.size(); ++i)
            g[i] += o.grad[i] * (v_reset - hv[i]);
        }
      });
}

}  // namespace spikegen
