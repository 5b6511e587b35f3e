#include "skt/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace skt::kernels {

namespace {
Backend g_backend =
#ifdef _OPENMP
    Backend::OpenMP;
#else
    Backend::Serial;
#endif
}  // namespace

Backend backend() { return g_backend; }

void set_backend(Backend b) {
#ifndef _OPENMP
  b = Backend::Serial;
#endif
  g_backend = b;
}

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

#define SKT_DISPATCH(fn, ...)                \
  if (g_backend == Backend::OpenMP) {        \
    omp::fn(__VA_ARGS__);                    \
  } else {                                   \
    serial::fn(__VA_ARGS__);                 \
  }

void matmul(double* c, const double* a, const double* b, int m, int k, int n) {
  SKT_DISPATCH(matmul, c, a, b, m, k, n)
}
void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n) {
  SKT_DISPATCH(matmul_acc, c, a, b, m, k, n)
}
void matmul_nt_acc(double* c, const double* a, const double* b, int m, int k, int n) {
  SKT_DISPATCH(matmul_nt_acc, c, a, b, m, k, n)
}
void matmul_tn_acc(double* c, const double* a, const double* b, int m, int k, int n) {
  SKT_DISPATCH(matmul_tn_acc, c, a, b, m, k, n)
}
void add(double* out, const double* a, const double* b, std::size_t n) {
  SKT_DISPATCH(add, out, a, b, n)
}
void mul(double* out, const double* a, const double* b, std::size_t n) {
  SKT_DISPATCH(mul, out, a, b, n)
}
void scale(double* out, const double* a, double s, std::size_t n) {
  SKT_DISPATCH(scale, out, a, s, n)
}
void relu(double* out, const double* x, std::size_t n) {
  SKT_DISPATCH(relu, out, x, n)
}
void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n) {
  SKT_DISPATCH(relu_backward_acc, dx, x, dy, n)
}
void sigmoid(double* out, const double* x, std::size_t n) {
  SKT_DISPATCH(sigmoid, out, x, n)
}

#undef SKT_DISPATCH

}  // namespace skt::kernels

namespace skt::kernels {

void sdpa_forward(double* out, double* probs, const SdpaArgs& a) {
  if (g_backend == Backend::OpenMP) {
    omp::sdpa_forward(out, probs, a);
  } else {
    serial::sdpa_forward(out, probs, a);
  }
}

void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a) {
  if (g_backend == Backend::OpenMP) {
    omp::sdpa_backward(dqp, dkp, dvp, dout, probs, a);
  } else {
    serial::sdpa_backward(dqp, dkp, dvp, dout, probs, a);
  }
}

void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d) {
  if (g_backend == Backend::OpenMP) {
    omp::layernorm_forward(out, xhat, inv_std, x, rows, d);
  } else {
    serial::layernorm_forward(out, xhat, inv_std, x, rows, d);
  }
}

void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d) {
  if (g_backend == Backend::OpenMP) {
    omp::layernorm_backward_acc(dx, dy, xhat, inv_std, rows, d);
  } else {
    serial::layernorm_backward_acc(dx, dy, xhat, inv_std, rows, d);
  }
}

}  // namespace skt::kernels
