#include "skt/kernels.hpp"

#include <cmath>
#include <cstring>

namespace skt::kernels::omp {

void matmul(double* c, const double* a, const double* b, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  matmul_acc(c, a, b, m, k, n);
}

void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = ai[l];
      const double* bl = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void matmul_nt_acc(double* c, const double* a, const double* b, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] += acc;
    }
  }
}

void matmul_tn_acc(double* c, const double* a, const double* b, int m, int k, int n) {
  // Parallel over output rows of C[k x n]; the r-loop accumulation order per
  // element is identical to the serial kernel.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int r = 0; r < m; ++r) {
      const double av = a[static_cast<std::size_t>(r) * k + i];
      const double* br = b + static_cast<std::size_t>(r) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * br[j];
    }
  }
}

void add(double* out, const double* a, const double* b, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) out[i] = a[i] + b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* a, double s, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) out[i] = a[i] * s;
}

void relu(double* out, const double* x, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void sigmoid(double* out, const double* x, std::size_t n) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) {
    const double v = x[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
}

}  // namespace skt::kernels::omp

#include "kernels_detail.hpp"

namespace skt::kernels::omp {

void sdpa_forward(double* out, double* probs, const SdpaArgs& a) {
  const int work = a.B * a.heads;
#pragma omp parallel for schedule(static)
  for (int bh = 0; bh < work; ++bh) {
    std::vector<double> scratch(static_cast<std::size_t>(a.L));
    detail::sdpa_forward_one(bh / a.heads, bh % a.heads, out, probs, a,
                             scratch.data());
  }
}

void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a) {
  const int work = a.B * a.heads;
#pragma omp parallel for schedule(static)
  for (int bh = 0; bh < work; ++bh) {
    std::vector<double> scratch(static_cast<std::size_t>(a.L));
    detail::sdpa_backward_one(bh / a.heads, bh % a.heads, dqp, dkp, dvp, dout,
                              probs, a, scratch.data());
  }
}

void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    detail::layernorm_forward_one(r, out, xhat, inv_std, x, d);
  }
}

void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    detail::layernorm_backward_one(r, dx, dy, xhat, inv_std, d);
  }
}

}  // namespace skt::kernels::omp
