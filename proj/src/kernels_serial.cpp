#include "skt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace skt::kernels::serial {

void matmul(double* c, const double* a, const double* b, int m, int k, int n) {
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  matmul_acc(c, a, b, m, k, n);
}

void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n) {
  // i-k-j order: streams over B rows, accumulates into one C row at a time.
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
  // C[i,j] += sum_r A[r,i] * B[r,j]; loop i outer so writes stay disjoint
  // under the OpenMP variant and the accumulation order matches it.
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
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* a, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void relu(double* out, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void sigmoid(double* out, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
}

}  // namespace skt::kernels::serial

namespace skt::kernels {

int row_softmax_limited(double* out, const double* logits, int len, int limit,
                        const std::uint8_t* valid) {
  const int lim = std::min(limit, len);
  double max_v = -1e300;
  int admitted = 0;
  for (int j = 0; j < lim; ++j) {
    if (valid && !valid[j]) continue;
    max_v = std::max(max_v, logits[j]);
    ++admitted;
  }
  if (admitted == 0) {
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(len));
    return 0;
  }
  double sum = 0.0;
  for (int j = 0; j < lim; ++j) {
    if (valid && !valid[j]) {
      out[j] = 0.0;
      continue;
    }
    out[j] = std::exp(logits[j] - max_v);
    sum += out[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < lim; ++j) out[j] *= inv;
  for (int j = lim; j < len; ++j) out[j] = 0.0;
  return admitted;
}

}  // namespace skt::kernels

#include "kernels_detail.hpp"

namespace skt::kernels::serial {

void sdpa_forward(double* out, double* probs, const SdpaArgs& a) {
  std::vector<double> scratch(static_cast<std::size_t>(a.L));
  for (int b = 0; b < a.B; ++b) {
    for (int h = 0; h < a.heads; ++h) {
      detail::sdpa_forward_one(b, h, out, probs, a, scratch.data());
    }
  }
}

void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a) {
  std::vector<double> scratch(static_cast<std::size_t>(a.L));
  for (int b = 0; b < a.B; ++b) {
    for (int h = 0; h < a.heads; ++h) {
      detail::sdpa_backward_one(b, h, dqp, dkp, dvp, dout, probs, a,
                                scratch.data());
    }
  }
}

void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d) {
  for (int r = 0; r < rows; ++r) {
    detail::layernorm_forward_one(r, out, xhat, inv_std, x, d);
  }
}

void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d) {
  for (int r = 0; r < rows; ++r) {
    detail::layernorm_backward_one(r, dx, dy, xhat, inv_std, d);
  }
}

}  // namespace skt::kernels::serial
