#include "ftlab/kernels.hpp"

#include <atomic>
#include <cmath>

namespace ftlab::kernels {

namespace {
std::atomic<bool> g_parallel{true};

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad_scalar(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void gemm_nn_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] += acc;
        }
    }
}

void gemm_nt_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] += acc;
        }
    }
}

void gemm_tn_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] += acc;
        }
    }
}

void tanh_forward(int64_t n, const double* x, double* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward_acc(int64_t n, const double* y, const double* dy, double* dx) {
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

void gelu_forward(int64_t n, const double* x, double* y) {
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward_acc(int64_t n, const double* x, const double* dy, double* dx) {
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
}

void softmax_rows(int64_t rows, int w, const double* x, double* y) {
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * w;
        double* yr = y + r * w;
        double mx = xr[0];
        for (int j = 1; j < w; ++j) mx = xr[j] > mx ? xr[j] : mx;
        double sum = 0.0;
        for (int j = 0; j < w; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < w; ++j) yr[j] *= inv;
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// parallel paths
// ---------------------------------------------------------------------------

namespace {
inline bool go_parallel(int64_t work) { return parallel_enabled() && work >= kParallelMinWork; }
}  // namespace

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
    const bool par = go_parallel(int64_t{1} * m * n * k);
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
    const bool par = go_parallel(int64_t{1} * m * n * k);
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void gemm_nn_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    const bool par = go_parallel(int64_t{1} * m * n * k);
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] += acc;
        }
    }
}

void gemm_nt_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    const bool par = go_parallel(int64_t{1} * m * n * k);
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] += acc;
        }
    }
}

void gemm_tn_acc(int m, int n, int k, const double* a, const double* b, double* c) {
    const bool par = go_parallel(int64_t{1} * m * n * k);
#pragma omp parallel for if (par) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] += acc;
        }
    }
}

void tanh_forward(int64_t n, const double* x, double* y) {
    const bool par = go_parallel(n * 8);
#pragma omp parallel for if (par) schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward_acc(int64_t n, const double* y, const double* dy, double* dx) {
    const bool par = go_parallel(n * 8);
#pragma omp parallel for if (par) schedule(static)
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

void gelu_forward(int64_t n, const double* x, double* y) {
    const bool par = go_parallel(n * 16);
#pragma omp parallel for if (par) schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward_acc(int64_t n, const double* x, const double* dy, double* dx) {
    const bool par = go_parallel(n * 16);
#pragma omp parallel for if (par) schedule(static)
    for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * gelu_grad_scalar(x[i]);
}

void softmax_rows(int64_t rows, int w, const double* x, double* y) {
    const bool par = go_parallel(rows * w * 8);
#pragma omp parallel for if (par) schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x + r * w;
        double* yr = y + r * w;
        double mx = xr[0];
        for (int j = 1; j < w; ++j) mx = xr[j] > mx ? xr[j] : mx;
        double sum = 0.0;
        for (int j = 0; j < w; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < w; ++j) yr[j] *= inv;
    }
}

}  // namespace ftlab::kernels
