#pragma once
#include <cstddef>
#include <cstdint>

// Dense math kernels backing the tensor operations. Every kernel has a serial
// driver and an OpenMP driver; both call the same non-inlined per-output
// routines, and parallel loops only ever write disjoint outputs with a fixed
// accumulation order per element. Results are therefore bit-identical across
// thread counts, which the training loops rely on for seeded reproducibility.
namespace mygo::kernels {

void set_parallel(bool on);
bool parallel_enabled();
void set_thread_count(int n);  // n <= 0 leaves the OpenMP default
int max_threads();

// c = a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c, size_t m, size_t k,
               size_t n);
// c[m x k] += a[m x n] * b[k x n]^T
void matmul_nt_acc(const double* a, const double* b, double* c, size_t m,
                   size_t n, size_t k);
// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn_acc(const double* a, const double* b, double* c, size_t m,
                   size_t k, size_t n);

struct ConvDims {
  size_t n, c, h, w;   // input
  size_t f, kh, kw;    // kernel
  size_t stride, pad;
  size_t oh, ow;       // output extents
};

// Cross-correlation; y overwritten, gradients accumulate.
void conv2d_fwd(const double* x, const double* k, double* y, const ConvDims& d);
void conv2d_bwd_input(const double* dy, const double* k, double* dx,
                      const ConvDims& d);
void conv2d_bwd_kernel(const double* dy, const double* x, double* dk,
                       const ConvDims& d);

// 2x2 max pooling over even extents; ties resolve to the first element in
// row-major order. argmax stores flat offsets into the input plane.
void maxpool2_fwd(const double* x, double* y, uint32_t* argmax, size_t n,
                  size_t c, size_t h, size_t w);
void maxpool2_bwd(const double* dy, const uint32_t* argmax, double* dx,
                  size_t n, size_t c, size_t h, size_t w);

enum class Act { relu, leaky_relu, tanh, sigmoid };
void act_fwd(Act kind, const double* x, double* y, size_t n, double slope);
// dx += dy * f'(x); y is the forward output (used by tanh/sigmoid).
void act_bwd(Act kind, const double* x, const double* y, const double* dy,
             double* dx, size_t n, double slope);

// y[i][j] = x[i][j] + b[j]
void add_bias_fwd(const double* x, const double* b, double* y, size_t rows,
                  size_t cols);
// db[j] += sum_i dy[i][j]
void add_bias_bwd(const double* dy, double* db, size_t rows, size_t cols);

// y[n][f][p] = x[n][f][p] + b[f]  (p = plane size)
void add_channel_bias_fwd(const double* x, const double* b, double* y,
                          size_t n, size_t f, size_t plane);
void add_channel_bias_bwd(const double* dy, double* db, size_t n, size_t f,
                          size_t plane);

// out[d] = mean of table rows selected by tokens[offsets[d]..offsets[d+1]);
// empty documents produce a zero row.
void embedding_mean_fwd(const double* table, size_t embed_dim,
                        const int32_t* tokens, const size_t* offsets,
                        size_t docs, double* out);
// Serial scatter: dtable[token] += dy_row / doc_len.
void embedding_mean_bwd(const double* dy, size_t embed_dim,
                        const int32_t* tokens, const size_t* offsets,
                        size_t docs, double* dtable);

}  // namespace mygo::kernels
