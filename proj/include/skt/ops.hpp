#pragma once

#include <cstdint>

#include "skt/rng.hpp"
#include "skt/tensor.hpp"

namespace skt::ops {

// Differentiable ops. Passing tape == nullptr runs the forward computation
// only (no backward rule recorded, outputs carry requires_grad = false).
// Every op validates shapes and rejects non-finite outputs.

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);  // Hadamard
// x [m,n] + bias [n], broadcast over rows.
Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias);
// Concatenation along the last dimension; leading dims must agree.
Tensor concat(Tape* tape, const Tensor& a, const Tensor& b);
Tensor relu(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor sum(Tape* tape, const Tensor& x);  // -> scalar
Tensor scale(Tape* tape, const Tensor& x, double s);

// Zeroes each element independently with probability p and scales survivors
// by 1/(1-p); identity when not training or p == 0. The mask is derived from
// a counter hash keyed by one draw from `rng` (deterministic, order-free).
Tensor dropout(Tape* tape, const Tensor& x, double p, bool training, Rng& rng);

// Rank-1 masked softmax with max-subtraction. Masked entries get exactly 0;
// throws NumericError when every entry is masked (callers that can see an
// empty context must handle it themselves).
Tensor softmax_masked(Tape* tape, const Tensor& logits, const Tensor& mask);

// Sum over mask-valid positions of the numerically stable binary
// cross-entropy on logits: max(z,0) - z*r + log(1 + exp(-|z|)).
Tensor bce_with_logits(Tape* tape, const Tensor& logits, const Tensor& targets,
                       const Tensor& mask);

}  // namespace skt::ops
