#include "mygo/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef MYGO_HAVE_OPENMP
#include <omp.h>
#endif

#if defined(__GNUC__) || defined(__clang__)
#define MYGO_NOINLINE [[gnu::noinline]]
#else
#define MYGO_NOINLINE
#endif

namespace mygo::kernels {

namespace {

std::atomic<bool> g_parallel{
#ifdef MYGO_HAVE_OPENMP
    true
#else
    false
#endif
};

// ---- shared per-output routines -------------------------------------------
// Both drivers call these; MYGO_NOINLINE pins one code path (and one
// floating-point accumulation order) per output element.

// Output positions o with 0 <= o*stride + k - pad < extent.
inline void valid_range(size_t k, size_t pad, size_t stride, size_t extent,
                        size_t out_extent, size_t& lo, size_t& hi) {
  const ptrdiff_t shift = static_cast<ptrdiff_t>(k) - static_cast<ptrdiff_t>(pad);
  const ptrdiff_t s = static_cast<ptrdiff_t>(stride);
  ptrdiff_t lo_s = shift >= 0 ? 0 : (-shift + s - 1) / s;
  ptrdiff_t hi_s = (static_cast<ptrdiff_t>(extent) - 1 - shift) / s + 1;
  if (hi_s < lo_s) hi_s = lo_s;
  lo = static_cast<size_t>(lo_s);
  hi = std::min(out_extent, static_cast<size_t>(hi_s));
  if (lo > hi) lo = hi;
}

MYGO_NOINLINE void mm_nn_row(const double* a_row, const double* b,
                             double* c_row, size_t k, size_t n) {
  for (size_t j = 0; j < n; ++j) c_row[j] = 0.0;
  for (size_t l = 0; l < k; ++l) {
    const double av = a_row[l];
    const double* b_row = b + l * n;
    for (size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

MYGO_NOINLINE void mm_nt_row(const double* a_row, const double* b,
                             double* c_row, size_t n, size_t k) {
  for (size_t j = 0; j < k; ++j) {
    const double* b_row = b + j * n;
    double acc = 0.0;
    for (size_t l = 0; l < n; ++l) acc += a_row[l] * b_row[l];
    c_row[j] += acc;
  }
}

MYGO_NOINLINE void mm_tn_row(const double* a, const double* b, double* c_row,
                             size_t i, size_t m, size_t k, size_t n) {
  for (size_t l = 0; l < m; ++l) {
    const double av = a[l * k + i];
    const double* b_row = b + l * n;
    for (size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

MYGO_NOINLINE void conv_fwd_plane(const double* x_n, const double* k_f,
                                  double* y_plane, const ConvDims& d) {
  const size_t plane = d.oh * d.ow;
  for (size_t i = 0; i < plane; ++i) y_plane[i] = 0.0;
  for (size_t c = 0; c < d.c; ++c) {
    const double* x_c = x_n + c * d.h * d.w;
    const double* k_c = k_f + c * d.kh * d.kw;
    for (size_t kh = 0; kh < d.kh; ++kh) {
      size_t oh_lo, oh_hi;
      valid_range(kh, d.pad, d.stride, d.h, d.oh, oh_lo, oh_hi);
      for (size_t kw = 0; kw < d.kw; ++kw) {
        const double kv = k_c[kh * d.kw + kw];
        size_t ow_lo, ow_hi;
        valid_range(kw, d.pad, d.stride, d.w, d.ow, ow_lo, ow_hi);
        const ptrdiff_t hshift =
            static_cast<ptrdiff_t>(kh) - static_cast<ptrdiff_t>(d.pad);
        const ptrdiff_t wshift =
            static_cast<ptrdiff_t>(kw) - static_cast<ptrdiff_t>(d.pad);
        for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
          const double* x_row = x_c + (oh * d.stride + hshift) * d.w + wshift;
          double* y_row = y_plane + oh * d.ow;
          if (d.stride == 1) {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              y_row[ow] += kv * x_row[ow];
          } else {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              y_row[ow] += kv * x_row[ow * d.stride];
          }
        }
      }
    }
  }
}

MYGO_NOINLINE void conv_bwd_input_plane(const double* dy_n, const double* k,
                                        double* dx_plane, size_t c,
                                        const ConvDims& d) {
  for (size_t f = 0; f < d.f; ++f) {
    const double* dy_f = dy_n + f * d.oh * d.ow;
    const double* k_fc = k + (f * d.c + c) * d.kh * d.kw;
    for (size_t kh = 0; kh < d.kh; ++kh) {
      size_t oh_lo, oh_hi;
      valid_range(kh, d.pad, d.stride, d.h, d.oh, oh_lo, oh_hi);
      const ptrdiff_t hshift =
          static_cast<ptrdiff_t>(kh) - static_cast<ptrdiff_t>(d.pad);
      for (size_t kw = 0; kw < d.kw; ++kw) {
        const double kv = k_fc[kh * d.kw + kw];
        size_t ow_lo, ow_hi;
        valid_range(kw, d.pad, d.stride, d.w, d.ow, ow_lo, ow_hi);
        const ptrdiff_t wshift =
            static_cast<ptrdiff_t>(kw) - static_cast<ptrdiff_t>(d.pad);
        for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
          const double* dy_row = dy_f + oh * d.ow;
          double* dx_row = dx_plane + (oh * d.stride + hshift) * d.w + wshift;
          if (d.stride == 1) {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              dx_row[ow] += kv * dy_row[ow];
          } else {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              dx_row[ow * d.stride] += kv * dy_row[ow];
          }
        }
      }
    }
  }
}

MYGO_NOINLINE void conv_bwd_kernel_pair(const double* dy, const double* x,
                                        double* dk_fc, size_t f, size_t c,
                                        const ConvDims& d) {
  for (size_t kh = 0; kh < d.kh; ++kh) {
    size_t oh_lo, oh_hi;
    valid_range(kh, d.pad, d.stride, d.h, d.oh, oh_lo, oh_hi);
    const ptrdiff_t hshift =
        static_cast<ptrdiff_t>(kh) - static_cast<ptrdiff_t>(d.pad);
    for (size_t kw = 0; kw < d.kw; ++kw) {
      size_t ow_lo, ow_hi;
      valid_range(kw, d.pad, d.stride, d.w, d.ow, ow_lo, ow_hi);
      const ptrdiff_t wshift =
          static_cast<ptrdiff_t>(kw) - static_cast<ptrdiff_t>(d.pad);
      double acc = 0.0;
      for (size_t n = 0; n < d.n; ++n) {
        const double* dy_f = dy + (n * d.f + f) * d.oh * d.ow;
        const double* x_c = x + (n * d.c + c) * d.h * d.w;
        for (size_t oh = oh_lo; oh < oh_hi; ++oh) {
          const double* dy_row = dy_f + oh * d.ow;
          const double* x_row = x_c + (oh * d.stride + hshift) * d.w + wshift;
          if (d.stride == 1) {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              acc += dy_row[ow] * x_row[ow];
          } else {
            for (size_t ow = ow_lo; ow < ow_hi; ++ow)
              acc += dy_row[ow] * x_row[ow * d.stride];
          }
        }
      }
      dk_fc[kh * d.kw + kw] += acc;
    }
  }
}

MYGO_NOINLINE void pool_fwd_plane(const double* x_plane, double* y_plane,
                                  uint32_t* arg_plane, size_t h, size_t w) {
  const size_t oh = h / 2, ow = w / 2;
  for (size_t i = 0; i < oh; ++i) {
    for (size_t j = 0; j < ow; ++j) {
      const size_t base = 2 * i * w + 2 * j;
      const size_t cand[4] = {base, base + 1, base + w, base + w + 1};
      size_t best = cand[0];
      double bv = x_plane[best];
      for (int t = 1; t < 4; ++t) {
        if (x_plane[cand[t]] > bv) {
          bv = x_plane[cand[t]];
          best = cand[t];
        }
      }
      y_plane[i * ow + j] = bv;
      arg_plane[i * ow + j] = static_cast<uint32_t>(best);
    }
  }
}

MYGO_NOINLINE void pool_bwd_plane(const double* dy_plane,
                                  const uint32_t* arg_plane, double* dx_plane,
                                  size_t h, size_t w) {
  const size_t count = (h / 2) * (w / 2);
  for (size_t i = 0; i < count; ++i) dx_plane[arg_plane[i]] += dy_plane[i];
}

MYGO_NOINLINE void act_fwd_chunk(Act kind, const double* x, double* y,
                                 size_t lo, size_t hi, double slope) {
  switch (kind) {
    case Act::relu:
      for (size_t i = lo; i < hi; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Act::leaky_relu:
      for (size_t i = lo; i < hi; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
      break;
    case Act::tanh:
      for (size_t i = lo; i < hi; ++i) y[i] = std::tanh(x[i]);
      break;
    case Act::sigmoid:
      for (size_t i = lo; i < hi; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
  }
}

MYGO_NOINLINE void act_bwd_chunk(Act kind, const double* x, const double* y,
                                 const double* dy, double* dx, size_t lo,
                                 size_t hi, double slope) {
  switch (kind) {
    case Act::relu:
      for (size_t i = lo; i < hi; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
      break;
    case Act::leaky_relu:
      for (size_t i = lo; i < hi; ++i) dx[i] += x[i] > 0.0 ? dy[i] : slope * dy[i];
      break;
    case Act::tanh:
      for (size_t i = lo; i < hi; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
      break;
    case Act::sigmoid:
      for (size_t i = lo; i < hi; ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
      break;
  }
}

constexpr size_t kChunk = 16384;

}  // namespace

void set_parallel(bool on) {
#ifdef MYGO_HAVE_OPENMP
  g_parallel.store(on);
#else
  (void)on;
#endif
}

bool parallel_enabled() { return g_parallel.load(); }

void set_thread_count(int n) {
#ifdef MYGO_HAVE_OPENMP
  if (n == 1) {
    g_parallel.store(false);
  } else if (n > 1) {
    g_parallel.store(true);
    omp_set_num_threads(n);
  }
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef MYGO_HAVE_OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

void matmul_nn(const double* a, const double* b, double* c, size_t m, size_t k,
               size_t n) {
  if (parallel_enabled() && m > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(m); ++i)
      mm_nn_row(a + i * k, b, c + i * n, k, n);
  } else {
    for (size_t i = 0; i < m; ++i) mm_nn_row(a + i * k, b, c + i * n, k, n);
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, size_t m,
                   size_t n, size_t k) {
  if (parallel_enabled() && m > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(m); ++i)
      mm_nt_row(a + i * n, b, c + i * k, n, k);
  } else {
    for (size_t i = 0; i < m; ++i) mm_nt_row(a + i * n, b, c + i * k, n, k);
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, size_t m,
                   size_t k, size_t n) {
  if (parallel_enabled() && k > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(k); ++i)
      mm_tn_row(a, b, c + i * n, i, m, k, n);
  } else {
    for (size_t i = 0; i < k; ++i) mm_tn_row(a, b, c + i * n, i, m, k, n);
  }
}

void conv2d_fwd(const double* x, const double* k, double* y,
                const ConvDims& d) {
  const size_t planes = d.n * d.f;
  const size_t x_sz = d.c * d.h * d.w;
  const size_t k_sz = d.c * d.kh * d.kw;
  const size_t y_sz = d.oh * d.ow;
  if (parallel_enabled() && planes > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(planes); ++p) {
      const size_t n = p / d.f, f = p % d.f;
      conv_fwd_plane(x + n * x_sz, k + f * k_sz, y + p * y_sz, d);
    }
  } else {
    for (size_t p = 0; p < planes; ++p) {
      const size_t n = p / d.f, f = p % d.f;
      conv_fwd_plane(x + n * x_sz, k + f * k_sz, y + p * y_sz, d);
    }
  }
}

void conv2d_bwd_input(const double* dy, const double* k, double* dx,
                      const ConvDims& d) {
  const size_t planes = d.n * d.c;
  const size_t dy_sz = d.f * d.oh * d.ow;
  const size_t plane_sz = d.h * d.w;
  if (parallel_enabled() && planes > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(planes); ++p) {
      const size_t n = p / d.c, c = p % d.c;
      conv_bwd_input_plane(dy + n * dy_sz, k, dx + p * plane_sz, c, d);
    }
  } else {
    for (size_t p = 0; p < planes; ++p) {
      const size_t n = p / d.c, c = p % d.c;
      conv_bwd_input_plane(dy + n * dy_sz, k, dx + p * plane_sz, c, d);
    }
  }
}

void conv2d_bwd_kernel(const double* dy, const double* x, double* dk,
                       const ConvDims& d) {
  const size_t pairs = d.f * d.c;
  const size_t k_sz = d.kh * d.kw;
  if (parallel_enabled() && pairs > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(pairs); ++p) {
      const size_t f = p / d.c, c = p % d.c;
      conv_bwd_kernel_pair(dy, x, dk + p * k_sz, f, c, d);
    }
  } else {
    for (size_t p = 0; p < pairs; ++p) {
      const size_t f = p / d.c, c = p % d.c;
      conv_bwd_kernel_pair(dy, x, dk + p * k_sz, f, c, d);
    }
  }
}

void maxpool2_fwd(const double* x, double* y, uint32_t* argmax, size_t n,
                  size_t c, size_t h, size_t w) {
  const size_t planes = n * c;
  const size_t in_sz = h * w, out_sz = (h / 2) * (w / 2);
  if (parallel_enabled() && planes > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(planes); ++p)
      pool_fwd_plane(x + p * in_sz, y + p * out_sz, argmax + p * out_sz, h, w);
  } else {
    for (size_t p = 0; p < planes; ++p)
      pool_fwd_plane(x + p * in_sz, y + p * out_sz, argmax + p * out_sz, h, w);
  }
}

void maxpool2_bwd(const double* dy, const uint32_t* argmax, double* dx,
                  size_t n, size_t c, size_t h, size_t w) {
  const size_t planes = n * c;
  const size_t in_sz = h * w, out_sz = (h / 2) * (w / 2);
  if (parallel_enabled() && planes > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(planes); ++p)
      pool_bwd_plane(dy + p * out_sz, argmax + p * out_sz, dx + p * in_sz, h, w);
  } else {
    for (size_t p = 0; p < planes; ++p)
      pool_bwd_plane(dy + p * out_sz, argmax + p * out_sz, dx + p * in_sz, h, w);
  }
}

void act_fwd(Act kind, const double* x, double* y, size_t n, double slope) {
  if (parallel_enabled() && n > kChunk) {
    const size_t chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
    for (ptrdiff_t ci = 0; ci < static_cast<ptrdiff_t>(chunks); ++ci) {
      const size_t lo = ci * kChunk;
      act_fwd_chunk(kind, x, y, lo, std::min(n, lo + kChunk), slope);
    }
  } else {
    act_fwd_chunk(kind, x, y, 0, n, slope);
  }
}

void act_bwd(Act kind, const double* x, const double* y, const double* dy,
             double* dx, size_t n, double slope) {
  if (parallel_enabled() && n > kChunk) {
    const size_t chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
    for (ptrdiff_t ci = 0; ci < static_cast<ptrdiff_t>(chunks); ++ci) {
      const size_t lo = ci * kChunk;
      act_bwd_chunk(kind, x, y, dy, dx, lo, std::min(n, lo + kChunk), slope);
    }
  } else {
    act_bwd_chunk(kind, x, y, dy, dx, 0, n, slope);
  }
}

void add_bias_fwd(const double* x, const double* b, double* y, size_t rows,
                  size_t cols) {
  for (size_t i = 0; i < rows; ++i) {
    const double* x_row = x + i * cols;
    double* y_row = y + i * cols;
    for (size_t j = 0; j < cols; ++j) y_row[j] = x_row[j] + b[j];
  }
}

void add_bias_bwd(const double* dy, double* db, size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i) {
    const double* dy_row = dy + i * cols;
    for (size_t j = 0; j < cols; ++j) db[j] += dy_row[j];
  }
}

void add_channel_bias_fwd(const double* x, const double* b, double* y,
                          size_t n, size_t f, size_t plane) {
  const size_t total = n * f * plane;
  for (size_t i = 0; i < total; ++i) y[i] = x[i] + b[(i / plane) % f];
}

void add_channel_bias_bwd(const double* dy, double* db, size_t n, size_t f,
                          size_t plane) {
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < f; ++j) {
      const double* row = dy + (i * f + j) * plane;
      double acc = 0.0;
      for (size_t p = 0; p < plane; ++p) acc += row[p];
      db[j] += acc;
    }
  }
}

void embedding_mean_fwd(const double* table, size_t embed_dim,
                        const int32_t* tokens, const size_t* offsets,
                        size_t docs, double* out) {
  if (parallel_enabled() && docs > 1) {
#pragma omp parallel for schedule(static)
    for (ptrdiff_t d = 0; d < static_cast<ptrdiff_t>(docs); ++d) {
      double* row = out + d * embed_dim;
      for (size_t e = 0; e < embed_dim; ++e) row[e] = 0.0;
      const size_t lo = offsets[d], hi = offsets[d + 1];
      for (size_t t = lo; t < hi; ++t) {
        const double* src = table + static_cast<size_t>(tokens[t]) * embed_dim;
        for (size_t e = 0; e < embed_dim; ++e) row[e] += src[e];
      }
      if (hi > lo) {
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (size_t e = 0; e < embed_dim; ++e) row[e] *= inv;
      }
    }
  } else {
    for (size_t d = 0; d < docs; ++d) {
      double* row = out + d * embed_dim;
      for (size_t e = 0; e < embed_dim; ++e) row[e] = 0.0;
      const size_t lo = offsets[d], hi = offsets[d + 1];
      for (size_t t = lo; t < hi; ++t) {
        const double* src = table + static_cast<size_t>(tokens[t]) * embed_dim;
        for (size_t e = 0; e < embed_dim; ++e) row[e] += src[e];
      }
      if (hi > lo) {
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (size_t e = 0; e < embed_dim; ++e) row[e] *= inv;
      }
    }
  }
}

void embedding_mean_bwd(const double* dy, size_t embed_dim,
                        const int32_t* tokens, const size_t* offsets,
                        size_t docs, double* dtable) {
  // Multiple documents can hit the same table row; keep the scatter serial.
  for (size_t d = 0; d < docs; ++d) {
    const size_t lo = offsets[d], hi = offsets[d + 1];
    if (hi == lo) continue;
    const double inv = 1.0 / static_cast<double>(hi - lo);
    const double* dy_row = dy + d * embed_dim;
    for (size_t t = lo; t < hi; ++t) {
      double* dst = dtable + static_cast<size_t>(tokens[t]) * embed_dim;
      for (size_t e = 0; e < embed_dim; ++e) dst[e] += inv * dy_row[e];
    }
  }
}

}  // namespace mygo::kernels
