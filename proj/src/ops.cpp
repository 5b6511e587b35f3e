#include "skt/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "skt/kernels.hpp"

namespace skt::ops {

namespace {

bool track(const Tape* tape, const Tensor& t) {
  return tape != nullptr && t.requires_grad;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
}

Tensor make_out(std::vector<int> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: rank-2 tensors required");
  }
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree (" +
                         std::to_string(a.dim(1)) + " vs " +
                         std::to_string(b.dim(0)) + ")");
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const bool rg = track(tape, a) || track(tape, b);
  Tensor out = make_out({m, n}, rg);
  kernels::matmul(out.ptr(), a.ptr(), b.ptr(), m, k, n);
  check_finite(out.ptr(), out.numel(), "matmul");
  if (rg) {
    Tensor ac = a, bc = b;
    if (ac.requires_grad) ac.ensure_grad();
    if (bc.requires_grad) bc.ensure_grad();
    Tensor oc = out;
    tape->record(out, [ac, bc, oc, m, k, n]() mutable {
      if (ac.requires_grad) {
        kernels::matmul_nt_acc(ac.gptr(), oc.gptr(), bc.ptr(), m, n, k);
      }
      if (bc.requires_grad) {
        kernels::matmul_tn_acc(bc.gptr(), ac.ptr(), oc.gptr(), m, k, n);
      }
    });
  }
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool rg = track(tape, a) || track(tape, b);
  Tensor out = make_out(a.shape, rg);
  kernels::add(out.ptr(), a.ptr(), b.ptr(), a.numel());
  check_finite(out.ptr(), out.numel(), "add");
  if (rg) {
    Tensor ac = a, bc = b, oc = out;
    if (ac.requires_grad) ac.ensure_grad();
    if (bc.requires_grad) bc.ensure_grad();
    tape->record(out, [ac, bc, oc]() mutable {
      const std::size_t n = oc.numel();
      if (ac.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) (*ac.grad)[i] += (*oc.grad)[i];
      }
      if (bc.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) (*bc.grad)[i] += (*oc.grad)[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool rg = track(tape, a) || track(tape, b);
  Tensor out = make_out(a.shape, rg);
  kernels::mul(out.ptr(), a.ptr(), b.ptr(), a.numel());
  check_finite(out.ptr(), out.numel(), "mul");
  if (rg) {
    Tensor ac = a, bc = b, oc = out;
    if (ac.requires_grad) ac.ensure_grad();
    if (bc.requires_grad) bc.ensure_grad();
    tape->record(out, [ac, bc, oc]() mutable {
      const std::size_t n = oc.numel();
      if (ac.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          (*ac.grad)[i] += (*oc.grad)[i] * (*bc.data)[i];
        }
      }
      if (bc.requires_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          (*bc.grad)[i] += (*oc.grad)[i] * (*ac.data)[i];
        }
      }
    });
  }
  return out;
}

Tensor add_bias(Tape* tape, const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: need x[m,n] and bias[n]");
  }
  const int m = x.dim(0), n = x.dim(1);
  const bool rg = track(tape, x) || track(tape, bias);
  Tensor out = make_out(x.shape, rg);
  for (int i = 0; i < m; ++i) {
    const double* xi = x.ptr() + static_cast<std::size_t>(i) * n;
    double* oi = out.ptr() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) oi[j] = xi[j] + bias.at(j);
  }
  check_finite(out.ptr(), out.numel(), "add_bias");
  if (rg) {
    Tensor xc = x, bc = bias, oc = out;
    if (xc.requires_grad) xc.ensure_grad();
    if (bc.requires_grad) bc.ensure_grad();
    tape->record(out, [xc, bc, oc, m, n]() mutable {
      if (xc.requires_grad) {
        const std::size_t total = oc.numel();
        for (std::size_t i = 0; i < total; ++i) (*xc.grad)[i] += (*oc.grad)[i];
      }
      if (bc.requires_grad) {
        for (int i = 0; i < m; ++i) {
          const double* gi = oc.gptr() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) (*bc.grad)[j] += gi[j];
        }
      }
    });
  }
  return out;
}

Tensor concat(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank()) throw DimensionError("concat: rank mismatch");
  for (int i = 0; i + 1 < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw DimensionError("concat: leading dimensions disagree");
    }
  }
  const int last = a.rank() - 1;
  const int na = a.dim(last), nb = b.dim(last);
  std::vector<int> shape = a.shape;
  shape[static_cast<std::size_t>(last)] = na + nb;
  const std::size_t rows = a.numel() / static_cast<std::size_t>(na);
  const bool rg = track(tape, a) || track(tape, b);
  Tensor out = make_out(shape, rg);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.ptr() + r * static_cast<std::size_t>(na + nb);
    std::memcpy(o, a.ptr() + r * na, sizeof(double) * na);
    std::memcpy(o + na, b.ptr() + r * nb, sizeof(double) * nb);
  }
  if (rg) {
    Tensor ac = a, bc = b, oc = out;
    if (ac.requires_grad) ac.ensure_grad();
    if (bc.requires_grad) bc.ensure_grad();
    tape->record(out, [ac, bc, oc, rows, na, nb]() mutable {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = oc.gptr() + r * static_cast<std::size_t>(na + nb);
        if (ac.requires_grad) {
          double* ga = ac.gptr() + r * na;
          for (int j = 0; j < na; ++j) ga[j] += g[j];
        }
        if (bc.requires_grad) {
          double* gb = bc.gptr() + r * nb;
          for (int j = 0; j < nb; ++j) gb[j] += g[na + j];
        }
      }
    });
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  const bool rg = track(tape, x);
  Tensor out = make_out(x.shape, rg);
  kernels::relu(out.ptr(), x.ptr(), x.numel());
  if (rg) {
    Tensor xc = x, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, oc]() mutable {
      kernels::relu_backward_acc(xc.gptr(), xc.ptr(), oc.gptr(), oc.numel());
    });
  }
  return out;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
  const bool rg = track(tape, x);
  Tensor out = make_out(x.shape, rg);
  kernels::sigmoid(out.ptr(), x.ptr(), x.numel());
  if (rg) {
    Tensor xc = x, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, oc]() mutable {
      const std::size_t n = oc.numel();
      for (std::size_t i = 0; i < n; ++i) {
        const double s = (*oc.data)[i];
        (*xc.grad)[i] += (*oc.grad)[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
  const bool rg = track(tape, x);
  double acc = 0.0;
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) acc += (*x.data)[i];
  Tensor out = Tensor::from({acc}, {1}, rg);
  if (rg) {
    Tensor xc = x, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, oc]() mutable {
      const double g = (*oc.grad)[0];
      const std::size_t nn = xc.numel();
      for (std::size_t i = 0; i < nn; ++i) (*xc.grad)[i] += g;
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& x, double s) {
  const bool rg = track(tape, x);
  Tensor out = make_out(x.shape, rg);
  kernels::scale(out.ptr(), x.ptr(), s, x.numel());
  check_finite(out.ptr(), out.numel(), "scale");
  if (rg) {
    Tensor xc = x, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, oc, s]() mutable {
      const std::size_t n = oc.numel();
      for (std::size_t i = 0; i < n; ++i) (*xc.grad)[i] += s * (*oc.grad)[i];
    });
  }
  return out;
}

Tensor dropout(Tape* tape, const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
  if (!training || p == 0.0) return x;

  const std::uint64_t mask_seed = rng.next_u64();
  const std::uint64_t threshold =
      static_cast<std::uint64_t>(p * 18446744073709551616.0);
  const double keep_scale = 1.0 / (1.0 - p);
  const std::size_t n = x.numel();

  auto mask = std::make_shared<std::vector<std::uint8_t>>(n);
  const bool rg = track(tape, x);
  Tensor out = make_out(x.shape, rg);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t c = mask_seed + i;
    const bool keep = Rng::splitmix64(c) >= threshold;
    (*mask)[i] = keep;
    (*out.data)[i] = keep ? (*x.data)[i] * keep_scale : 0.0;
  }
  if (rg) {
    Tensor xc = x, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, oc, mask, keep_scale]() mutable {
      const std::size_t nn = oc.numel();
      for (std::size_t i = 0; i < nn; ++i) {
        if ((*mask)[i]) (*xc.grad)[i] += (*oc.grad)[i] * keep_scale;
      }
    });
  }
  return out;
}

Tensor softmax_masked(Tape* tape, const Tensor& logits, const Tensor& mask) {
  if (logits.rank() != 1) throw DimensionError("softmax_masked: rank-1 input");
  require_same_shape(logits, mask, "softmax_masked");
  const int len = logits.dim(0);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) valid[static_cast<std::size_t>(i)] = mask.at(i) != 0.0;

  const bool rg = track(tape, logits);
  Tensor out = make_out(logits.shape, rg);
  const int admitted =
      kernels::row_softmax_limited(out.ptr(), logits.ptr(), len, len, valid.data());
  if (admitted == 0) {
    throw NumericError("softmax_masked: empty context (all entries masked)");
  }
  check_finite(out.ptr(), out.numel(), "softmax_masked");
  if (rg) {
    Tensor xc = logits, oc = out;
    xc.ensure_grad();
    auto vmask = std::make_shared<std::vector<std::uint8_t>>(std::move(valid));
    tape->record(out, [xc, oc, vmask, len]() mutable {
      double dot = 0.0;
      for (int i = 0; i < len; ++i) {
        dot += (*oc.grad)[static_cast<std::size_t>(i)] * oc.at(i);
      }
      for (int i = 0; i < len; ++i) {
        if (!(*vmask)[static_cast<std::size_t>(i)]) continue;
        (*xc.grad)[static_cast<std::size_t>(i)] +=
            oc.at(i) * ((*oc.grad)[static_cast<std::size_t>(i)] - dot);
      }
    });
  }
  return out;
}

Tensor bce_with_logits(Tape* tape, const Tensor& logits, const Tensor& targets,
                       const Tensor& mask) {
  require_same_shape(logits, targets, "bce_with_logits");
  require_same_shape(logits, mask, "bce_with_logits");
  const std::size_t n = logits.numel();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((*mask.data)[i] == 0.0) continue;
    const double r = (*targets.data)[i];
    if (r != 0.0 && r != 1.0) {
      throw NumericError("bce_with_logits: targets must be 0 or 1");
    }
    const double z = (*logits.data)[i];
    loss += std::max(z, 0.0) - z * r + std::log1p(std::exp(-std::abs(z)));
  }
  const bool rg = track(tape, logits);
  Tensor out = Tensor::from({loss}, {1}, rg);
  if (rg) {
    Tensor xc = logits, tc = targets, mc = mask, oc = out;
    xc.ensure_grad();
    tape->record(out, [xc, tc, mc, oc, n]() mutable {
      const double g = (*oc.grad)[0];
      for (std::size_t i = 0; i < n; ++i) {
        if ((*mc.data)[i] == 0.0) continue;
        const double z = (*xc.data)[i];
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
        (*xc.grad)[i] += g * (s - (*tc.data)[i]);
      }
    });
  }
  return out;
}

}  // namespace skt::ops
