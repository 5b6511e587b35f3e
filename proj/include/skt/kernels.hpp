#pragma once

#include <cstddef>
#include <cstdint>

namespace skt::kernels {

// Dense double-precision kernels on raw row-major buffers. Every kernel has a
// serial reference implementation and an OpenMP one. The OpenMP versions
// parallelize only over disjoint output regions (rows / (batch,head) pairs)
// and keep every per-element accumulation order fixed, so both backends
// produce bit-identical results for any thread count. Reductions stay serial.
//
// Backend selection is global; tests pin it explicitly, the CLI exposes it.

enum class Backend { Serial, OpenMP };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();
int max_threads();
void set_threads(int n);

// Multi-head scaled dot-product attention over projected inputs laid out
// [B*L, d], d split into `heads` contiguous slices. Query t of row b admits
// keys j with j < key_limit[b*L+t] and valid[b*L+j]; rows with no admitted
// key produce zeros. `probs` ([B*heads*L*L]) stores the post-softmax,
// pre-dropout weights for the backward pass. drop_mask (same size, may be
// null) zeroes dropped weights, survivors are scaled by keep_scale.
struct SdpaArgs {
  const double* qp;
  const double* kp;
  const double* vp;
  const int* key_limit;
  const std::uint8_t* valid;
  const std::uint8_t* drop_mask;  // null when dropout is off
  double keep_scale;
  int B, L, d, heads;
};

inline constexpr double kLayerNormEps = 1e-5;

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void matmul(double* c, const double* a, const double* b, int m, int k, int n);
// C[m x n] += A[m x k] * B[k x n]
void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n);
// C[m x n] += A[m x k] * B[n x k]^T   (B stored row-major [n x k])
void matmul_nt_acc(double* c, const double* a, const double* b, int m, int k, int n);
// C[k x n] += A[m x k]^T * B[m x n]
void matmul_tn_acc(double* c, const double* a, const double* b, int m, int k, int n);

void add(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
void relu(double* out, const double* x, std::size_t n);
void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n);
void sigmoid(double* out, const double* x, std::size_t n);

void sdpa_forward(double* out, double* probs, const SdpaArgs& a);
void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a);

// Parameter-free row-wise normalization to zero mean / unit variance.
// xhat [rows x d] and inv_std [rows] are saved for the backward pass.
void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d);
void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d);

}  // namespace serial

namespace omp {

void matmul(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_nt_acc(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_tn_acc(double* c, const double* a, const double* b, int m, int k, int n);

void add(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
void relu(double* out, const double* x, std::size_t n);
void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n);
void sigmoid(double* out, const double* x, std::size_t n);

void sdpa_forward(double* out, double* probs, const SdpaArgs& a);
void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a);
void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d);
void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d);

}  // namespace omp

// Dispatch through the active backend.
void matmul(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_acc(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_nt_acc(double* c, const double* a, const double* b, int m, int k, int n);
void matmul_tn_acc(double* c, const double* a, const double* b, int m, int k, int n);
void add(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
void relu(double* out, const double* x, std::size_t n);
void relu_backward_acc(double* dx, const double* x, const double* dy, std::size_t n);
void sigmoid(double* out, const double* x, std::size_t n);
void sdpa_forward(double* out, double* probs, const SdpaArgs& a);
void sdpa_backward(double* dqp, double* dkp, double* dvp, const double* dout,
                   const double* probs, const SdpaArgs& a);
void layernorm_forward(double* out, double* xhat, double* inv_std,
                       const double* x, int rows, int d);
void layernorm_backward_acc(double* dx, const double* dy, const double* xhat,
                            const double* inv_std, int rows, int d);

// Stable softmax of one row restricted to `allowed < limit` positions with an
// optional validity mask; writes zeros outside. Returns the number of
// admitted positions (0 means the row is all-masked and stays zero).
int row_softmax_limited(double* out, const double* logits, int len, int limit,
                        const std::uint8_t* valid);

}  // namespace skt::kernels
