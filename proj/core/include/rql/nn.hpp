#ifndef RQL_NN_HPP
#define RQL_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

#include "rql/errors.hpp"
#include "rql/tensor.hpp"

// Forward and hand-derived backward passes for the fixed layer set the
// Q-networks need: valid-padding conv2d, affine, relu and an LSTM cell.
// All functions are pure over caller-owned tensors.

namespace rql::nn {

inline int conv_output_extent(int input, int kernel, int stride) {
  return (input - kernel) / stride + 1;
}

// Eight independent accumulators break the floating-point dependency chain
// so the compiler can keep the FMA pipes full. Fixed summation order keeps
// results deterministic.
template <typename T>
inline T dot(const T* a, const T* b, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  T s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

#if defined(__AVX2__) && defined(__FMA__)
// gcc's cost model declines to vectorize the reduction, so the float path
// is spelled out. Lane-separated accumulators: deterministic order.
inline float dot(const float* a, const float* b, int n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps();
  __m256 acc3 = _mm256_setzero_ps();
  int i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16), _mm256_loadu_ps(b + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24), _mm256_loadu_ps(b + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  const __m256 acc = _mm256_add_ps(_mm256_add_ps(acc0, acc1),
                                   _mm256_add_ps(acc2, acc3));
  const __m128 lo = _mm256_castps256_ps128(acc);
  const __m128 hi = _mm256_extractf128_ps(acc, 1);
  __m128 sum4 = _mm_add_ps(lo, hi);
  sum4 = _mm_add_ps(sum4, _mm_movehl_ps(sum4, sum4));
  sum4 = _mm_add_ss(sum4, _mm_shuffle_ps(sum4, sum4, 1));
  float s = _mm_cvtss_f32(sum4);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}
#endif

// dst[i] += a * x[i]
template <typename T>
inline void axpy(T* dst, T a, const T* x, int n) {
  for (int i = 0; i < n; ++i) dst[i] += a * x[i];
}

#if defined(__AVX2__) && defined(__FMA__)
inline void axpy(float* dst, float a, const float* x, int n) {
  const __m256 av = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(dst + i,
                     _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i),
                                     _mm256_loadu_ps(dst + i)));
  }
  for (; i < n; ++i) dst[i] += a * x[i];
}
#endif

template <typename T>
inline T dot_ones(const T* a, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
  }
  T s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i];
  return s;
}

// input [C_in,H,W], filters [C_out,C_in,k,k], bias [C_out]; valid padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& filters,
                 const Tensor<T>& bias, int stride) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d input must be [C,H,W], got " + input.shape_string());
  }
  if (filters.rank() != 4) {
    throw ShapeError("conv2d filters must be [C_out,C_in,k,k], got " +
                     filters.shape_string());
  }
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = filters.dim(0), k = filters.dim(2);
  if (filters.dim(1) != c_in) {
    throw ShapeError("conv2d channel axis mismatch: input has " +
                     std::to_string(c_in) + " channels, filters expect " +
                     std::to_string(filters.dim(1)));
  }
  if (filters.dim(3) != k) {
    throw ShapeError("conv2d filters must be square, got " + filters.shape_string());
  }
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ShapeError("conv2d bias axis mismatch: expected [" +
                     std::to_string(c_out) + "], got " + bias.shape_string());
  }
  if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
  if (h < k || w < k) {
    throw ShapeError("conv2d input " + input.shape_string() +
                     " smaller than kernel " + std::to_string(k) +
                     " on spatial axes");
  }

  const int oh = conv_output_extent(h, k, stride);
  const int ow = conv_output_extent(w, k, stride);
  Tensor<T> out({c_out, oh, ow});

  // filter-tap outer, output-row inner: the inner loop has no cross-
  // iteration dependency, so it vectorizes over the output row
  const T* in = input.data();
  const T* flt = filters.data();
  for (int co = 0; co < c_out; ++co) {
    T* out_ch = out.data() + static_cast<size_t>(co) * oh * ow;
    const T b = bias[static_cast<size_t>(co)];
    for (int i = 0; i < oh * ow; ++i) out_ch[i] = b;
    for (int ci = 0; ci < c_in; ++ci) {
      const T* in_ch = in + static_cast<size_t>(ci) * h * w;
      const T* f_ch = flt + ((static_cast<size_t>(co) * c_in + ci) * k) * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T fw = f_ch[static_cast<size_t>(ky) * k + kx];
          for (int oy = 0; oy < oh; ++oy) {
            const T* in_row = in_ch + (static_cast<size_t>(oy) * stride + ky) * w + kx;
            T* out_row = out_ch + static_cast<size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              out_row[ox] += fw * in_row[static_cast<size_t>(ox) * stride];
            }
          }
        }
      }
    }
  }
  check_finite(out, "conv2d");
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> filters;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                               const Tensor<T>& filters, int stride) {
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = filters.dim(0), k = filters.dim(2);
  const int oh = conv_output_extent(h, k, stride);
  const int ow = conv_output_extent(w, k, stride);
  if (grad_out.rank() != 3 || grad_out.dim(0) != c_out || grad_out.dim(1) != oh ||
      grad_out.dim(2) != ow) {
    throw ShapeError("conv2d_backward grad_out " + grad_out.shape_string() +
                     " does not match forward output [" + std::to_string(c_out) +
                     "," + std::to_string(oh) + "," + std::to_string(ow) + "]");
  }

  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(filters.shape()),
                   Tensor<T>({c_out})};
  const T* go = grad_out.data();
  const T* in = input.data();
  const T* flt = filters.data();
  T* gi = g.input.data();
  T* gf = g.filters.data();

  for (int co = 0; co < c_out; ++co) {
    const T* go_ch = go + static_cast<size_t>(co) * oh * ow;
    g.bias[static_cast<size_t>(co)] = dot_ones(go_ch, oh * ow);
    for (int ci = 0; ci < c_in; ++ci) {
      const T* in_ch = in + static_cast<size_t>(ci) * h * w;
      T* gi_ch = gi + static_cast<size_t>(ci) * h * w;
      const size_t f_base = ((static_cast<size_t>(co) * c_in + ci) * k) * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T fw = flt[f_base + static_cast<size_t>(ky) * k + kx];
          T facc = T(0);
          for (int oy = 0; oy < oh; ++oy) {
            const T* go_row = go_ch + static_cast<size_t>(oy) * ow;
            const size_t base = (static_cast<size_t>(oy) * stride + ky) * w + kx;
            const T* in_row = in_ch + base;
            T* gi_row = gi_ch + base;
            T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
            int ox = 0;
            for (; ox + 4 <= ow; ox += 4) {
              const size_t s = static_cast<size_t>(stride);
              a0 += go_row[ox] * in_row[ox * s];
              a1 += go_row[ox + 1] * in_row[(ox + 1) * s];
              a2 += go_row[ox + 2] * in_row[(ox + 2) * s];
              a3 += go_row[ox + 3] * in_row[(ox + 3) * s];
              gi_row[ox * s] += go_row[ox] * fw;
              gi_row[(ox + 1) * s] += go_row[ox + 1] * fw;
              gi_row[(ox + 2) * s] += go_row[ox + 2] * fw;
              gi_row[(ox + 3) * s] += go_row[ox + 3] * fw;
            }
            T tail = (a0 + a1) + (a2 + a3);
            for (; ox < ow; ++ox) {
              tail += go_row[ox] * in_row[static_cast<size_t>(ox) * stride];
              gi_row[static_cast<size_t>(ox) * stride] += go_row[ox] * fw;
            }
            facc += tail;
          }
          gf[f_base + static_cast<size_t>(ky) * k + kx] += facc;
        }
      }
    }
  }
  check_finite(g.input, "conv2d_backward/input");
  check_finite(g.filters, "conv2d_backward/filters");
  check_finite(g.bias, "conv2d_backward/bias");
  return g;
}

// input [n], weight [m,n], bias [m] -> [m]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  if (input.rank() != 1) {
    throw ShapeError("linear input must be rank 1, got " + input.shape_string());
  }
  if (weight.rank() != 2 || weight.dim(1) != input.dim(0)) {
    throw ShapeError("linear weight " + weight.shape_string() +
                     " incompatible with input " + input.shape_string() +
                     " on the fan-in axis");
  }
  const int m = weight.dim(0), n = weight.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != m) {
    throw ShapeError("linear bias axis mismatch: expected [" + std::to_string(m) +
                     "], got " + bias.shape_string());
  }
  Tensor<T> out({m});
  const T* x = input.data();
  const T* wp = weight.data();
  for (int r = 0; r < m; ++r) {
    out[static_cast<size_t>(r)] =
        bias[static_cast<size_t>(r)] + dot(wp + static_cast<size_t>(r) * n, x, n);
  }
  check_finite(out, "linear");
  return out;
}

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                               const Tensor<T>& weight) {
  const int m = weight.dim(0), n = weight.dim(1);
  if (grad_out.rank() != 1 || grad_out.dim(0) != m) {
    throw ShapeError("linear_backward grad_out " + grad_out.shape_string() +
                     " does not match output width " + std::to_string(m));
  }
  LinearGrads<T> g{Tensor<T>({n}), Tensor<T>({m, n}), Tensor<T>({m})};
  const T* go = grad_out.data();
  const T* x = input.data();
  const T* wp = weight.data();
  T* gx = g.input.data();
  T* gw = g.weight.data();
  for (int r = 0; r < m; ++r) {
    const T gv = go[r];
    axpy(gw + static_cast<size_t>(r) * n, gv, x, n);
    axpy(gx, gv, wp + static_cast<size_t>(r) * n, n);
    g.bias[static_cast<size_t>(r)] = gv;
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T(0) ? input[i] : T(0);
  }
  return out;
}

// Subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
  if (!grad_out.same_shape(input)) {
    throw ShapeError("relu_backward grad_out " + grad_out.shape_string() +
                     " does not match input " + input.shape_string());
  }
  Tensor<T> g(input.shape());
  for (size_t i = 0; i < input.size(); ++i) {
    g[i] = input[i] > T(0) ? grad_out[i] : T(0);
  }
  return g;
}

template <typename T>
struct LstmState {
  Tensor<T> hidden;
  Tensor<T> cell;

  static LstmState zeros(int units) {
    return LstmState{Tensor<T>({units}), Tensor<T>({units})};
  }
  int units() const { return hidden.dim(0); }
};

// Four gate blocks (input, forget, cell candidate, output), each [u, n+u]
// over the concatenated [x; h_prev], plus biases [u].
template <typename T>
struct LstmWeightsRef {
  const Tensor<T>& w_in;
  const Tensor<T>& w_forget;
  const Tensor<T>& w_cell;
  const Tensor<T>& w_out;
  const Tensor<T>& b_in;
  const Tensor<T>& b_forget;
  const Tensor<T>& b_cell;
  const Tensor<T>& b_out;
};

template <typename T>
struct LstmGradsRef {
  Tensor<T>& w_in;
  Tensor<T>& w_forget;
  Tensor<T>& w_cell;
  Tensor<T>& w_out;
  Tensor<T>& b_in;
  Tensor<T>& b_forget;
  Tensor<T>& b_cell;
  Tensor<T>& b_out;
};

// Everything the backward pass needs. hidden is the step output and, with
// cell, the next recurrent state.
template <typename T>
struct LstmCellTrace {
  Tensor<T> xh;           // [n+u] concatenated input and previous hidden
  Tensor<T> gate_in;      // sigma
  Tensor<T> gate_forget;  // sigma
  Tensor<T> gate_cell;    // tanh candidate
  Tensor<T> gate_out;     // sigma
  Tensor<T> cell_prev;
  Tensor<T> cell;
  Tensor<T> cell_tanh;
  Tensor<T> hidden;

  LstmState<T> state() const { return LstmState<T>{hidden, cell}; }
};

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Standard forget-gate LSTM, no peepholes: sigmoid gates, tanh candidate
// and cell-output squashing. output == next hidden state.
template <typename T>
LstmCellTrace<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& prev,
                           const LstmWeightsRef<T>& w) {
  if (x.rank() != 1) {
    throw ShapeError("lstm_cell input must be rank 1, got " + x.shape_string());
  }
  if (!prev.hidden.same_shape(prev.cell)) {
    throw ShapeError("lstm state hidden " + prev.hidden.shape_string() +
                     " and cell " + prev.cell.shape_string() + " differ");
  }
  const int n = x.dim(0);
  const int u = prev.hidden.dim(0);
  for (const Tensor<T>* gate : {&w.w_in, &w.w_forget, &w.w_cell, &w.w_out}) {
    if (gate->rank() != 2 || gate->dim(0) != u || gate->dim(1) != n + u) {
      throw ShapeError("lstm gate weights must be [" + std::to_string(u) + "," +
                       std::to_string(n + u) + "], got " + gate->shape_string());
    }
  }
  for (const Tensor<T>* gb : {&w.b_in, &w.b_forget, &w.b_cell, &w.b_out}) {
    if (gb->rank() != 1 || gb->dim(0) != u) {
      throw ShapeError("lstm gate bias must be [" + std::to_string(u) +
                       "], got " + gb->shape_string());
    }
  }

  LstmCellTrace<T> t;
  t.xh = Tensor<T>({n + u});
  for (int i = 0; i < n; ++i) t.xh[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
  for (int i = 0; i < u; ++i) t.xh[static_cast<size_t>(n + i)] = prev.hidden[static_cast<size_t>(i)];

  Tensor<T> pre_in = linear(t.xh, w.w_in, w.b_in);
  Tensor<T> pre_forget = linear(t.xh, w.w_forget, w.b_forget);
  Tensor<T> pre_cell = linear(t.xh, w.w_cell, w.b_cell);
  Tensor<T> pre_out = linear(t.xh, w.w_out, w.b_out);

  t.gate_in = Tensor<T>({u});
  t.gate_forget = Tensor<T>({u});
  t.gate_cell = Tensor<T>({u});
  t.gate_out = Tensor<T>({u});
  t.cell_prev = prev.cell;
  t.cell = Tensor<T>({u});
  t.cell_tanh = Tensor<T>({u});
  t.hidden = Tensor<T>({u});

  for (int i = 0; i < u; ++i) {
    const auto idx = static_cast<size_t>(i);
    const T gi = sigmoid(pre_in[idx]);
    const T gf = sigmoid(pre_forget[idx]);
    const T gc = std::tanh(pre_cell[idx]);
    const T go = sigmoid(pre_out[idx]);
    const T c = gf * prev.cell[idx] + gi * gc;
    const T ct = std::tanh(c);
    t.gate_in[idx] = gi;
    t.gate_forget[idx] = gf;
    t.gate_cell[idx] = gc;
    t.gate_out[idx] = go;
    t.cell[idx] = c;
    t.cell_tanh[idx] = ct;
    t.hidden[idx] = go * ct;
  }
  check_finite(t.hidden, "lstm_cell/hidden");
  check_finite(t.cell, "lstm_cell/cell");
  return t;
}

template <typename T>
struct LstmCellGrads {
  Tensor<T> x;          // dL/dx
  LstmState<T> prev;    // dL/d(prev hidden, prev cell)
};

// grad_hidden must already include both the per-step loss gradient and the
// recurrent gradient flowing back from the following step. Weight gradients
// accumulate into `wg` so BPTT sums across timesteps.
template <typename T>
LstmCellGrads<T> lstm_cell_backward(const Tensor<T>& grad_hidden,
                                    const Tensor<T>& grad_cell_next,
                                    const LstmCellTrace<T>& t,
                                    const LstmWeightsRef<T>& w,
                                    LstmGradsRef<T>& wg) {
  const int u = t.hidden.dim(0);
  const int nu = t.xh.dim(0);
  const int n = nu - u;
  if (grad_hidden.rank() != 1 || grad_hidden.dim(0) != u) {
    throw ShapeError("lstm grad_hidden " + grad_hidden.shape_string() +
                     " does not match units " + std::to_string(u));
  }
  if (grad_cell_next.rank() != 1 || grad_cell_next.dim(0) != u) {
    throw ShapeError("lstm grad_cell " + grad_cell_next.shape_string() +
                     " does not match units " + std::to_string(u));
  }

  Tensor<T> dpre_in({u}), dpre_forget({u}), dpre_cell({u}), dpre_out({u});
  Tensor<T> dcell_prev({u});
  for (int i = 0; i < u; ++i) {
    const auto idx = static_cast<size_t>(i);
    const T dh = grad_hidden[idx];
    const T ct = t.cell_tanh[idx];
    const T go = t.gate_out[idx];
    const T dc = grad_cell_next[idx] + dh * go * (T(1) - ct * ct);
    const T d_go = dh * ct;
    const T gi = t.gate_in[idx];
    const T gf = t.gate_forget[idx];
    const T gc = t.gate_cell[idx];
    dpre_out[idx] = d_go * go * (T(1) - go);
    dpre_in[idx] = dc * gc * gi * (T(1) - gi);
    dpre_forget[idx] = dc * t.cell_prev[idx] * gf * (T(1) - gf);
    dpre_cell[idx] = dc * gi * (T(1) - gc * gc);
    dcell_prev[idx] = dc * gf;
  }

  Tensor<T> dxh({nu});
  auto apply = [&](const Tensor<T>& dpre, const Tensor<T>& weight,
                   Tensor<T>& gw, Tensor<T>& gb) {
    const T* dp = dpre.data();
    const T* xh = t.xh.data();
    const T* wp = weight.data();
    T* gwp = gw.data();
    T* dxp = dxh.data();
    for (int r = 0; r < u; ++r) {
      const T gv = dp[r];
      axpy(gwp + static_cast<size_t>(r) * nu, gv, xh, nu);
      axpy(dxp, gv, wp + static_cast<size_t>(r) * nu, nu);
      gb[static_cast<size_t>(r)] += gv;
    }
  };
  apply(dpre_in, w.w_in, wg.w_in, wg.b_in);
  apply(dpre_forget, w.w_forget, wg.w_forget, wg.b_forget);
  apply(dpre_cell, w.w_cell, wg.w_cell, wg.b_cell);
  apply(dpre_out, w.w_out, wg.w_out, wg.b_out);

  LstmCellGrads<T> g{Tensor<T>({n}), LstmState<T>{Tensor<T>({u}), std::move(dcell_prev)}};
  for (int i = 0; i < n; ++i) g.x[static_cast<size_t>(i)] = dxh[static_cast<size_t>(i)];
  for (int i = 0; i < u; ++i) g.prev.hidden[static_cast<size_t>(i)] = dxh[static_cast<size_t>(n + i)];
  check_finite(g.x, "lstm_cell_backward/x");
  return g;
}

}  // namespace rql::nn

#endif  // RQL_NN_HPP
