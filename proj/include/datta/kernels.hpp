#pragma once

#include <cstdint>

// Compute kernels behind the autodiff ops. Every kernel has a serial
// reference implementation and an OpenMP variant; the two are bit-identical
// because parallelization is per output element (the per-element accumulation
// order never changes). Mode is a process-global switch.

namespace datta::kernels {

enum class Mode { Serial, Parallel };

void set_mode(Mode m);
Mode mode();
int thread_count();

// c(m,n) = a op b (+ c if accumulate). ta/tb transpose the stored operands:
// a is stored (m,k) or, if ta, (k,m); b is stored (k,n) or, if tb, (n,k).
void mm(const float *a, const float *b, float *c, int64_t m, int64_t n, int64_t k, bool ta, bool tb,
        bool accumulate);

// Batched mm over the leading dimension with fixed per-batch strides.
void bmm(const float *a, const float *b, float *c, int64_t batch, int64_t m, int64_t n, int64_t k,
         bool ta, bool tb, bool accumulate, int64_t stride_a, int64_t stride_b, int64_t stride_c);

// 1-D convolution over time. in: (batch, c_in, t_in), weight: (c_out, c_in, kernel),
// bias: (c_out) or nullptr, out: (batch, t_out, c_out) with t_out = (t_in - kernel)/stride + 1.
void conv1d_fwd(const float *in, const float *weight, const float *bias, float *out, int64_t batch,
                int64_t c_in, int64_t t_in, int64_t c_out, int64_t kernel, int64_t stride);
void conv1d_bwd_data(const float *gout, const float *weight, float *gin, int64_t batch, int64_t c_in,
                     int64_t t_in, int64_t c_out, int64_t kernel, int64_t stride);
void conv1d_bwd_weight(const float *gout, const float *in, float *gweight, float *gbias, int64_t batch,
                       int64_t c_in, int64_t t_in, int64_t c_out, int64_t kernel, int64_t stride);

// Row-wise softmax over the trailing dimension.
void softmax_rows(const float *x, float *y, int64_t rows, int64_t cols);
// gx = y * (gy - sum(y*gy)) per row; accumulates into gx.
void softmax_rows_bwd(const float *y, const float *gy, float *gx, int64_t rows, int64_t cols);

// Row-wise layer norm over the trailing dimension with learnable gain/bias.
// mean/inv_std caches are written per row for the backward pass.
void layernorm_fwd(const float *x, const float *gain, const float *bias, float *y, float *mean,
                   float *inv_std, int64_t rows, int64_t cols, float eps);
// Accumulates into gx, ggain, gbias.
void layernorm_bwd(const float *x, const float *gain, const float *gy, const float *mean,
                   const float *inv_std, float *gx, float *ggain, float *gbias, int64_t rows,
                   int64_t cols);

} // namespace datta::kernels
