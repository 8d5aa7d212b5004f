#pragma once

#include <cstdint>

// Dense math kernels. Every production entry point has a serial reference
// twin under kernels::serial; the reference versions are the ground truth
// the parallel paths are tested and benchmarked against.
//
// Conventions: all matrices are row-major doubles, C is m x n, k is the
// summation length.
//   nn: C (+)= A * B        A is m x k, B is k x n
//   nt: C (+)= A * B^T      A is m x k, B is n x k
//   tn: C (+)= A^T * B      A is k x m, B is k x n
namespace ftlab::kernels {

namespace serial {

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nn_acc(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nt_acc(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_tn_acc(int m, int n, int k, const double* a, const double* b, double* c);

void tanh_forward(int64_t n, const double* x, double* y);
void tanh_backward_acc(int64_t n, const double* y, const double* dy, double* dx);
void gelu_forward(int64_t n, const double* x, double* y);
void gelu_backward_acc(int64_t n, const double* x, const double* dy, double* dx);

// Numerically stable softmax over each contiguous row of width w.
void softmax_rows(int64_t rows, int w, const double* x, double* y);

}  // namespace serial

// Production entry points. Parallelized with OpenMP when enabled at build
// time, the runtime switch is on, and the problem is large enough to pay for
// a thread team. Results are bit-identical to the serial reference for any
// thread count: each output element is produced by exactly one thread with a
// fixed summation order.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nn_acc(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_nt_acc(int m, int n, int k, const double* a, const double* b, double* c);
void gemm_tn_acc(int m, int n, int k, const double* a, const double* b, double* c);

void tanh_forward(int64_t n, const double* x, double* y);
void tanh_backward_acc(int64_t n, const double* y, const double* dy, double* dx);
void gelu_forward(int64_t n, const double* x, double* y);
void gelu_backward_acc(int64_t n, const double* x, const double* dy, double* dx);
void softmax_rows(int64_t rows, int w, const double* x, double* y);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Runtime switch for the parallel paths (used by tests and the benchmark).
bool parallel_enabled();
void set_parallel_enabled(bool on);

// Minimum number of inner-loop operations before a loop goes parallel.
// Below this, fork/join overhead beats the win on small desk-scale tensors.
inline constexpr int64_t kParallelMinWork = 1 << 17;

}  // namespace ftlab::kernels
