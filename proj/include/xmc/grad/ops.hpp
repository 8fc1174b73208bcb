#pragma once

#include <xmc/grad/tape.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace xmc::grad {

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
// Eight interleaved partial sums keep the inner loop vectorizable without
// reassociation flags; the summation order is fixed, so results are exact
// across runs.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  constexpr std::size_t L = 8;
  const std::size_t body = n - n % L;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T lanes[L] = {};
      for (std::size_t j = 0; j < body; j += L)
        for (std::size_t l = 0; l < L; ++l) lanes[l] += arow[j + l] * brow[j + l];
      T acc = T(0);
      for (std::size_t l = 0; l < L; ++l) acc += lanes[l];
      for (std::size_t j = body; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  std::size_t in_c, in_h, in_w, k, stride, pad, out_h, out_w;
  std::size_t patch() const { return in_c * k * k; }
  std::size_t positions() const { return out_h * out_w; }
};

// Unfolds one image (in_c x in_h x in_w) into a (in_c*k*k) x (out_h*out_w) matrix.
template <class T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.in_h) &&
                                ix < static_cast<std::ptrdiff_t>(g.in_w);
            row[oy * g.out_w + ox] =
                inside ? img[(c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)]
                       : T(0);
          }
        }
      }
}

template <class T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            img[(c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)] +=
                row[oy * g.out_w + ox];
          }
        }
      }
}

template <class T>
bool any_requires_grad(const Tape<T>& tape, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (tape.requires_grad(v)) return true;
  return false;
}

}  // namespace detail

// Cross-correlation (no kernel flip). kernels: (out, in, k, k); bias: (out,1,1,1).
template <class T>
Var conv2d(Tape<T>& tape, Var input, Var kernels, Var bias, std::size_t stride = 1, std::size_t padding = 0) {
  const auto& x = tape.value(input);
  const auto& w = tape.value(kernels);
  const auto& b = tape.value(bias);
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3))
    throw ShapeError("conv2d: kernel shape " + shape_string(w.shape()) + " incompatible with input shape " +
                     shape_string(x.shape()));
  if (b.size() != w.dim(0))
    throw ShapeError("conv2d: bias shape " + shape_string(b.shape()) + " incompatible with kernel shape " +
                     shape_string(w.shape()));
  const std::size_t k = w.dim(2);
  if (x.dim(2) + 2 * padding < k || x.dim(3) + 2 * padding < k)
    throw ShapeError("conv2d: kernel shape " + shape_string(w.shape()) + " larger than padded input shape " +
                     shape_string(x.shape()));
  const detail::ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, padding,
                               (x.dim(2) + 2 * padding - k) / stride + 1, (x.dim(3) + 2 * padding - k) / stride + 1};
  const std::size_t batch = x.dim(0), out_c = w.dim(0), positions = g.positions(), patch = g.patch();

  Tensor<T> out({batch, out_c, g.out_h, g.out_w});
  std::vector<T> col(patch * positions);
  const std::size_t in_stride = g.in_c * g.in_h * g.in_w;
  for (std::size_t n = 0; n < batch; ++n) {
    detail::im2col(x.ptr() + n * in_stride, g, col.data());
    T* o = out.ptr() + n * out_c * positions;
    for (std::size_t oc = 0; oc < out_c; ++oc) std::fill(o + oc * positions, o + (oc + 1) * positions, b[oc]);
    detail::gemm_nn(out_c, positions, patch, w.ptr(), col.data(), o);
  }

  const bool rg = detail::any_requires_grad(tape, {input, kernels, bias});
  return tape.record(
      std::move(out),
      [input, kernels, bias, g, batch, out_c](Tape<T>& t, std::size_t self) {
        const auto& x = t.value(input.id);
        const auto& w = t.value(kernels.id);
        const auto& gy = t.grad(self);
        const std::size_t positions = g.positions(), patch = g.patch();
        const std::size_t in_stride = g.in_c * g.in_h * g.in_w;
        std::vector<T> col(patch * positions), dcol(patch * positions);
        for (std::size_t n = 0; n < batch; ++n) {
          const T* go = gy.ptr() + n * out_c * positions;
          if (t.requires_grad(bias.id)) {
            auto& gb = t.grad(bias.id);
            for (std::size_t oc = 0; oc < out_c; ++oc) {
              T acc = T(0);
              for (std::size_t p = 0; p < positions; ++p) acc += go[oc * positions + p];
              gb[oc] += acc;
            }
          }
          if (t.requires_grad(kernels.id)) {
            detail::im2col(x.ptr() + n * in_stride, g, col.data());
            detail::gemm_nt(out_c, positions, patch, go, col.data(), t.grad(kernels.id).ptr());
          }
          if (t.requires_grad(input.id)) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            detail::gemm_tn(out_c, positions, patch, w.ptr(), go, dcol.data());
            detail::col2im(dcol.data(), g, t.grad(input.id).ptr() + n * in_stride);
          }
        }
      },
      rg);
}

template <class T>
Var relu(Tape<T>& tape, Var input) {
  const auto& x = tape.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return tape.record(
      std::move(out),
      [input](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(input.id)) return;
        const auto& x = t.value(input.id);
        const auto& gy = t.grad(self);
        auto& gx = t.grad(input.id);
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x[i] > T(0)) gx[i] += gy[i];
      },
      tape.requires_grad(input));
}

// 2x2 window, stride 2. Ties resolve to the first maximum in row-major window order.
template <class T>
Var maxpool2(Tape<T>& tape, Var input) {
  const auto& x = tape.value(input);
  if (x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
    throw ShapeError("maxpool2: spatial dims must be even, got shape " + shape_string(x.shape()));
  const std::size_t oh = x.dim(2) / 2, ow = x.dim(3) / 2;
  Tensor<T> out({x.dim(0), x.dim(1), oh, ow});
  std::vector<std::size_t> argmax(out.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
          std::size_t best = x.offset(n, c, 2 * y, 2 * xx);
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = x.offset(n, c, 2 * y + dy, 2 * xx + dx);
              if (x[idx] > x[best]) best = idx;
            }
          out[o] = x[best];
          argmax[o] = best;
        }
  return tape.record(
      std::move(out),
      [input, argmax = std::move(argmax)](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(input.id)) return;
        const auto& gy = t.grad(self);
        auto& gx = t.grad(input.id);
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += gy[i];
      },
      tape.requires_grad(input));
}

// (B, C, H, W) -> (B, C, 1, 1), mean over the spatial positions.
template <class T>
Var global_avg_pool(Tape<T>& tape, Var input) {
  const auto& x = tape.value(input);
  const std::size_t hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw ShapeError("global_avg_pool: empty spatial extent in shape " + shape_string(x.shape()));
  Tensor<T> out(Shape{x.dim(0), x.dim(1), 1, 1});
  for (std::size_t i = 0; i < out.size(); ++i) {
    T acc = T(0);
    for (std::size_t p = 0; p < hw; ++p) acc += x[i * hw + p];
    out[i] = acc / static_cast<T>(hw);
  }
  return tape.record(
      std::move(out),
      [input, hw](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(input.id)) return;
        const auto& gy = t.grad(self);
        auto& gx = t.grad(input.id);
        const T scale = T(1) / static_cast<T>(hw);
        for (std::size_t i = 0; i < gy.size(); ++i)
          for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] += gy[i] * scale;
      },
      tape.requires_grad(input));
}

// input (B, K), weights (N, K), bias (N) -> (B, N)
template <class T>
Var linear(Tape<T>& tape, Var input, Var weights, Var bias) {
  const auto& x = tape.value(input);
  const auto& w = tape.value(weights);
  const auto& b = tape.value(bias);
  const std::size_t batch = x.dim(0), in = x.size() / std::max<std::size_t>(batch, 1), out_n = w.dim(0);
  if (w.size() != out_n * in)
    throw ShapeError("linear: weight shape " + shape_string(w.shape()) + " incompatible with input shape " +
                     shape_string(x.shape()));
  if (b.size() != out_n)
    throw ShapeError("linear: bias shape " + shape_string(b.shape()) + " incompatible with weight shape " +
                     shape_string(w.shape()));
  Tensor<T> out(Shape{batch, out_n, 1, 1});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out_n; ++o) {
      T acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += w[o * in + k] * x[n * in + k];
      out[n * out_n + o] = acc;
    }
  return tape.record(
      std::move(out),
      [input, weights, bias, batch, in, out_n](Tape<T>& t, std::size_t self) {
        const auto& x = t.value(input.id);
        const auto& w = t.value(weights.id);
        const auto& gy = t.grad(self);
        const bool gi = t.requires_grad(input.id), gw = t.requires_grad(weights.id), gb = t.requires_grad(bias.id);
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < out_n; ++o) {
            const T g = gy[n * out_n + o];
            if (gb) t.grad(bias.id)[o] += g;
            if (gw) {
              auto& gwt = t.grad(weights.id);
              for (std::size_t k = 0; k < in; ++k) gwt[o * in + k] += g * x[n * in + k];
            }
            if (gi) {
              auto& gx = t.grad(input.id);
              for (std::size_t k = 0; k < in; ++k) gx[n * in + k] += g * w[o * in + k];
            }
          }
      },
      detail::any_requires_grad(tape, {input, weights, bias}));
}

// Elementwise logistic; outputs are kept inside the open interval (0, 1).
template <class T>
Var sigmoid(Tape<T>& tape, Var input) {
  const auto& x = tape.value(input);
  Tensor<T> out(x.shape());
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    out[i] = std::clamp(s, lo, hi);
  }
  return tape.record(
      std::move(out),
      [input](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(input.id)) return;
        const auto& y = t.value(self);
        const auto& gy = t.grad(self);
        auto& gx = t.grad(input.id);
        for (std::size_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
      },
      tape.requires_grad(input));
}

inline constexpr double kBceClip = 1e-7;

// Mean binary cross-entropy over every entry; probabilities are clipped to
// [1e-7, 1 - 1e-7] (the clip has zero derivative outside that range).
template <class T>
Var bce_loss(Tape<T>& tape, Var probabilities, const Tensor<T>& targets) {
  const auto& p = tape.value(probabilities);
  if (p.shape() != targets.shape())
    throw ShapeError("bce_loss: probability shape " + shape_string(p.shape()) + " does not match target shape " +
                     shape_string(targets.shape()));
  if (p.size() == 0) throw ShapeError("bce_loss: empty input");
  const T lo = static_cast<T>(kBceClip), hi = T(1) - static_cast<T>(kBceClip);
  // accumulate in double so the 32-bit loss does not depend on summation drift
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = static_cast<double>(std::clamp(p[i], lo, hi));
    const double t = static_cast<double>(targets[i]);
    acc -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
  }
  const T loss = static_cast<T>(acc / static_cast<double>(p.size()));
  return tape.record(
      Tensor<T>::scalar(loss),
      [probabilities, targets, lo, hi](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(probabilities.id)) return;
        const auto& p = t.value(probabilities.id);
        auto& gp = t.grad(probabilities.id);
        const T g = t.grad(self)[0] / static_cast<T>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] < lo || p[i] > hi) continue;
          gp[i] += g * ((T(1) - targets[i]) / (T(1) - p[i]) - targets[i] / p[i]);
        }
      },
      tape.requires_grad(probabilities));
}

// Sum of all entries; a scalar reduction used by tests and diagnostics.
template <class T>
Var sum(Tape<T>& tape, Var input) {
  const auto& x = tape.value(input);
  T acc = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  return tape.record(
      Tensor<T>::scalar(acc),
      [input](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(input.id)) return;
        const T g = t.grad(self)[0];
        auto& gx = t.grad(input.id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
      },
      tape.requires_grad(input));
}

}  // namespace xmc::grad
