#include "datta/kernels.hpp"

#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace datta::kernels {

namespace {
std::atomic<Mode> g_mode{
#ifdef _OPENMP
    Mode::Parallel
#else
    Mode::Serial
#endif
};

inline bool parallel() { return g_mode.load(std::memory_order_relaxed) == Mode::Parallel; }
} // namespace

void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }
Mode mode() { return g_mode.load(std::memory_order_relaxed); }

int thread_count() {
#ifdef _OPENMP
    return parallel() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

inline float dot_row(const float *a, const float *b, int64_t m, int64_t n, int64_t k, bool ta,
                     bool tb, int64_t i, int64_t j) {
    // element (i,j) of op(a)*op(b); stored strides depend on transpose flags
    float acc = 0.0f;
    if (!ta && !tb) {
        const float *ar = a + i * k;
        for (int64_t p = 0; p < k; ++p) acc += ar[p] * b[p * n + j];
    } else if (!ta && tb) {
        const float *ar = a + i * k;
        const float *br = b + j * k;
        for (int64_t p = 0; p < k; ++p) acc += ar[p] * br[p];
    } else if (ta && !tb) {
        for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
    } else {
        for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
    }
    return acc;
}

void mm_serial(const float *a, const float *b, float *c, int64_t m, int64_t n, int64_t k, bool ta,
               bool tb, bool accumulate) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            float v = dot_row(a, b, m, n, k, ta, tb, i, j);
            if (accumulate)
                c[i * n + j] += v;
            else
                c[i * n + j] = v;
        }
}

void mm_parallel(const float *a, const float *b, float *c, int64_t m, int64_t n, int64_t k, bool ta,
                 bool tb, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            float v = dot_row(a, b, m, n, k, ta, tb, i, j);
            if (accumulate)
                c[i * n + j] += v;
            else
                c[i * n + j] = v;
        }
}

} // namespace

void mm(const float *a, const float *b, float *c, int64_t m, int64_t n, int64_t k, bool ta, bool tb,
        bool accumulate) {
    if (parallel() && m >= 2)
        mm_parallel(a, b, c, m, n, k, ta, tb, accumulate);
    else
        mm_serial(a, b, c, m, n, k, ta, tb, accumulate);
}

void bmm(const float *a, const float *b, float *c, int64_t batch, int64_t m, int64_t n, int64_t k,
         bool ta, bool tb, bool accumulate, int64_t stride_a, int64_t stride_b, int64_t stride_c) {
    if (parallel() && batch * m >= 2) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t i = 0; i < m; ++i) {
                const float *ab = a + bi * stride_a;
                const float *bb = b + bi * stride_b;
                float *cb = c + bi * stride_c;
                for (int64_t j = 0; j < n; ++j) {
                    float v = dot_row(ab, bb, m, n, k, ta, tb, i, j);
                    if (accumulate)
                        cb[i * n + j] += v;
                    else
                        cb[i * n + j] = v;
                }
            }
    } else {
        for (int64_t bi = 0; bi < batch; ++bi)
            mm_serial(a + bi * stride_a, b + bi * stride_b, c + bi * stride_c, m, n, k, ta, tb,
                      accumulate);
    }
}

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

namespace {

inline float conv_cell(const float *in_b, const float *weight, int64_t c_in, int64_t t_in,
                       int64_t kernel, int64_t stride, int64_t to, int64_t co) {
    float acc = 0.0f;
    const float *w = weight + co * c_in * kernel;
    for (int64_t ci = 0; ci < c_in; ++ci) {
        const float *row = in_b + ci * t_in + to * stride;
        const float *wr = w + ci * kernel;
        for (int64_t kk = 0; kk < kernel; ++kk) acc += row[kk] * wr[kk];
    }
    return acc;
}

} // namespace

void conv1d_fwd(const float *in, const float *weight, const float *bias, float *out, int64_t batch,
                int64_t c_in, int64_t t_in, int64_t c_out, int64_t kernel, int64_t stride) {
    const int64_t t_out = (t_in - kernel) / stride + 1;
    if (parallel() && batch * t_out >= 2) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t to = 0; to < t_out; ++to) {
                const float *in_b = in + b * c_in * t_in;
                float *out_row = out + (b * t_out + to) * c_out;
                for (int64_t co = 0; co < c_out; ++co)
                    out_row[co] = (bias ? bias[co] : 0.0f) +
                                  conv_cell(in_b, weight, c_in, t_in, kernel, stride, to, co);
            }
    } else {
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t to = 0; to < t_out; ++to) {
                const float *in_b = in + b * c_in * t_in;
                float *out_row = out + (b * t_out + to) * c_out;
                for (int64_t co = 0; co < c_out; ++co)
                    out_row[co] = (bias ? bias[co] : 0.0f) +
                                  conv_cell(in_b, weight, c_in, t_in, kernel, stride, to, co);
            }
    }
}

void conv1d_bwd_data(const float *gout, const float *weight, float *gin, int64_t batch, int64_t c_in,
                     int64_t t_in, int64_t c_out, int64_t kernel, int64_t stride) {
    const int64_t t_out = (t_in - kernel) / stride + 1;
    auto body = [&](int64_t b, int64_t ci) {
        float *g = gin + (b * c_in + ci) * t_in;
        const float *go = gout + b * t_out * c_out;
        for (int64_t to = 0; to < t_out; ++to) {
            const float *go_row = go + to * c_out;
            for (int64_t kk = 0; kk < kernel; ++kk) {
                float acc = 0.0f;
                for (int64_t co = 0; co < c_out; ++co)
                    acc += go_row[co] * weight[(co * c_in + ci) * kernel + kk];
                g[to * stride + kk] += acc;
            }
        }
    };
    if (parallel() && batch * c_in >= 2) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t ci = 0; ci < c_in; ++ci) body(b, ci);
    } else {
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t ci = 0; ci < c_in; ++ci) body(b, ci);
    }
}

void conv1d_bwd_weight(const float *gout, const float *in, float *gweight, float *gbias,
                       int64_t batch, int64_t c_in, int64_t t_in, int64_t c_out, int64_t kernel,
                       int64_t stride) {
    const int64_t t_out = (t_in - kernel) / stride + 1;
    auto body = [&](int64_t co) {
        float *gw = gweight + co * c_in * kernel;
        float gb = 0.0f;
        for (int64_t b = 0; b < batch; ++b) {
            const float *in_b = in + b * c_in * t_in;
            const float *go = gout + b * t_out * c_out;
            for (int64_t to = 0; to < t_out; ++to) {
                const float g = go[to * c_out + co];
                gb += g;
                for (int64_t ci = 0; ci < c_in; ++ci) {
                    const float *row = in_b + ci * t_in + to * stride;
                    float *gwr = gw + ci * kernel;
                    for (int64_t kk = 0; kk < kernel; ++kk) gwr[kk] += g * row[kk];
                }
            }
        }
        if (gbias) gbias[co] += gb;
    };
    if (parallel() && c_out >= 2) {
#pragma omp parallel for schedule(static)
        for (int64_t co = 0; co < c_out; ++co) body(co);
    } else {
        for (int64_t co = 0; co < c_out; ++co) body(co);
    }
}

// ---------------------------------------------------------------------------
// softmax / layernorm
// ---------------------------------------------------------------------------

namespace {

inline void softmax_row(const float *x, float *y, int64_t cols) {
    float mx = x[0];
    for (int64_t j = 1; j < cols; ++j)
        if (x[j] > mx) mx = x[j];
    float sum = 0.0f;
    for (int64_t j = 0; j < cols; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    const float inv = 1.0f / sum;
    for (int64_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void softmax_row_bwd(const float *y, const float *gy, float *gx, int64_t cols) {
    float dot = 0.0f;
    for (int64_t j = 0; j < cols; ++j) dot += y[j] * gy[j];
    for (int64_t j = 0; j < cols; ++j) gx[j] += y[j] * (gy[j] - dot);
}

} // namespace

void softmax_rows(const float *x, float *y, int64_t rows, int64_t cols) {
    if (parallel() && rows >= 2) {
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
    } else {
        for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
    }
}

void softmax_rows_bwd(const float *y, const float *gy, float *gx, int64_t rows, int64_t cols) {
    if (parallel() && rows >= 2) {
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r)
            softmax_row_bwd(y + r * cols, gy + r * cols, gx + r * cols, cols);
    } else {
        for (int64_t r = 0; r < rows; ++r)
            softmax_row_bwd(y + r * cols, gy + r * cols, gx + r * cols, cols);
    }
}

namespace {

inline void ln_row(const float *x, const float *gain, const float *bias, float *y, float *mean,
                   float *inv_std, int64_t cols, float eps) {
    float mu = 0.0f;
    for (int64_t j = 0; j < cols; ++j) mu += x[j];
    mu /= static_cast<float>(cols);
    float var = 0.0f;
    for (int64_t j = 0; j < cols; ++j) {
        const float d = x[j] - mu;
        var += d * d;
    }
    var /= static_cast<float>(cols);
    const float inv = 1.0f / std::sqrt(var + eps);
    *mean = mu;
    *inv_std = inv;
    for (int64_t j = 0; j < cols; ++j) y[j] = (x[j] - mu) * inv * gain[j] + bias[j];
}

} // namespace

void layernorm_fwd(const float *x, const float *gain, const float *bias, float *y, float *mean,
                   float *inv_std, int64_t rows, int64_t cols, float eps) {
    if (parallel() && rows >= 2) {
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r)
            ln_row(x + r * cols, gain, bias, y + r * cols, mean + r, inv_std + r, cols, eps);
    } else {
        for (int64_t r = 0; r < rows; ++r)
            ln_row(x + r * cols, gain, bias, y + r * cols, mean + r, inv_std + r, cols, eps);
    }
}

void layernorm_bwd(const float *x, const float *gain, const float *gy, const float *mean,
                   const float *inv_std, float *gx, float *ggain, float *gbias, int64_t rows,
                   int64_t cols) {
    // gx is parallel-safe per row; ggain/gbias are shared accumulators and are
    // reduced serially to keep results identical to the serial reference.
    auto gx_row = [&](int64_t r) {
        const float *xr = x + r * cols;
        const float *gyr = gy + r * cols;
        float *gxr = gx + r * cols;
        const float mu = mean[r], inv = inv_std[r];
        float sum_g = 0.0f, sum_gx = 0.0f;
        for (int64_t j = 0; j < cols; ++j) {
            const float gj = gyr[j] * gain[j];
            const float xh = (xr[j] - mu) * inv;
            sum_g += gj;
            sum_gx += gj * xh;
        }
        const float n = static_cast<float>(cols);
        for (int64_t j = 0; j < cols; ++j) {
            const float gj = gyr[j] * gain[j];
            const float xh = (xr[j] - mu) * inv;
            gxr[j] += inv * (gj - sum_g / n - xh * sum_gx / n);
        }
    };
    if (parallel() && rows >= 2) {
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) gx_row(r);
    } else {
        for (int64_t r = 0; r < rows; ++r) gx_row(r);
    }
    for (int64_t r = 0; r < rows; ++r) {
        const float *xr = x + r * cols;
        const float *gyr = gy + r * cols;
        const float mu = mean[r], inv = inv_std[r];
        for (int64_t j = 0; j < cols; ++j) {
            ggain[j] += gyr[j] * (xr[j] - mu) * inv;
            gbias[j] += gyr[j];
        }
    }
}

} // namespace datta::kernels
