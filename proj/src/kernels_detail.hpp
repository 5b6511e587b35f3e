#pragma once

// Per-work-item bodies shared by the serial and OpenMP kernel backends so
// both compute identical floating-point sequences; the backends differ only
// in how they schedule the (batch, head) / row loops.

#include <algorithm>
#include <cmath>
#include <vector>

#include "skt/kernels.hpp"

namespace skt::kernels::detail {

inline void sdpa_forward_one(int b, int h, double* out, double* probs,
                             const SdpaArgs& a, double* score_scratch) {
  const int L = a.L, d = a.d;
  const int dh = d / a.heads;
  const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t row0 = static_cast<std::size_t>(b) * L;
  const std::size_t head_off = static_cast<std::size_t>(h) * dh;
  const std::size_t pbase =
      (static_cast<std::size_t>(b) * a.heads + h) * L * static_cast<std::size_t>(L);

  for (int t = 0; t < L; ++t) {
    const int lim = std::min(a.key_limit[row0 + t], L);
    double* prow = probs + pbase + static_cast<std::size_t>(t) * L;
    const double* q = a.qp + (row0 + t) * d + head_off;
    for (int j = 0; j < lim; ++j) {
      const double* k = a.kp + (row0 + j) * d + head_off;
      double s = 0.0;
      for (int i = 0; i < dh; ++i) s += q[i] * k[i];
      score_scratch[j] = s * alpha;
    }
    const int admitted =
        row_softmax_limited(prow, score_scratch, L, lim, a.valid + row0);
    double* o = out + (row0 + t) * d + head_off;
    std::fill(o, o + dh, 0.0);
    if (admitted == 0) continue;
    const std::uint8_t* mrow =
        a.drop_mask ? a.drop_mask + pbase + static_cast<std::size_t>(t) * L : nullptr;
    for (int j = 0; j < lim; ++j) {
      double w = prow[j];
      if (w == 0.0) continue;
      if (mrow) {
        if (!mrow[j]) continue;
        w *= a.keep_scale;
      }
      const double* v = a.vp + (row0 + j) * d + head_off;
      for (int i = 0; i < dh; ++i) o[i] += w * v[i];
    }
  }
}

inline void sdpa_backward_one(int b, int h, double* dqp, double* dkp,
                              double* dvp, const double* dout,
                              const double* probs, const SdpaArgs& a,
                              double* dp_scratch) {
  const int L = a.L, d = a.d;
  const int dh = d / a.heads;
  const double alpha = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t row0 = static_cast<std::size_t>(b) * L;
  const std::size_t head_off = static_cast<std::size_t>(h) * dh;
  const std::size_t pbase =
      (static_cast<std::size_t>(b) * a.heads + h) * L * static_cast<std::size_t>(L);

  for (int t = 0; t < L; ++t) {
    const int lim = std::min(a.key_limit[row0 + t], L);
    if (lim == 0) continue;
    const double* prow = probs + pbase + static_cast<std::size_t>(t) * L;
    const std::uint8_t* mrow =
        a.drop_mask ? a.drop_mask + pbase + static_cast<std::size_t>(t) * L : nullptr;
    const double* go = dout + (row0 + t) * d + head_off;
    const double* q = a.qp + (row0 + t) * d + head_off;

    // dvp and d(prob) through the dropout mask.
    double dot = 0.0;
    for (int j = 0; j < lim; ++j) {
      const double p = prow[j];
      if (p == 0.0) {
        dp_scratch[j] = 0.0;
        continue;
      }
      const double* v = a.vp + (row0 + j) * d + head_off;
      double gv = 0.0;
      for (int i = 0; i < dh; ++i) gv += go[i] * v[i];
      double w = p;
      double dp = gv;
      if (mrow) {
        if (mrow[j]) {
          w *= a.keep_scale;
          dp *= a.keep_scale;
        } else {
          w = 0.0;
          dp = 0.0;
        }
      }
      if (w != 0.0) {
        double* dv = dvp + (row0 + j) * d + head_off;
        for (int i = 0; i < dh; ++i) dv[i] += w * go[i];
      }
      dp_scratch[j] = dp;
      dot += p * dp;
    }
    // Softmax backward, then into q/k projections.
    double* dq = dqp + (row0 + t) * d + head_off;
    for (int j = 0; j < lim; ++j) {
      const double p = prow[j];
      if (p == 0.0) continue;
      const double ds = alpha * p * (dp_scratch[j] - dot);
      if (ds == 0.0) continue;
      const double* k = a.kp + (row0 + j) * d + head_off;
      double* dk = dkp + (row0 + j) * d + head_off;
      for (int i = 0; i < dh; ++i) {
        dq[i] += ds * k[i];
        dk[i] += ds * q[i];
      }
    }
  }
}

inline void layernorm_forward_one(int r, double* out, double* xhat,
                                  double* inv_std, const double* x, int d) {
  const std::size_t off = static_cast<std::size_t>(r) * d;
  const double* xr = x + off;
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += xr[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    const double c = xr[i] - mean;
    var += c * c;
  }
  var /= d;
  const double is = 1.0 / std::sqrt(var + kLayerNormEps);
  inv_std[r] = is;
  for (int i = 0; i < d; ++i) {
    const double v = (xr[i] - mean) * is;
    xhat[off + i] = v;
    out[off + i] = v;
  }
}

inline void layernorm_backward_one(int r, double* dx, const double* dy,
                                   const double* xhat, const double* inv_std,
                                   int d) {
  const std::size_t off = static_cast<std::size_t>(r) * d;
  double mean_dy = 0.0, mean_dy_xhat = 0.0;
  for (int i = 0; i < d; ++i) {
    mean_dy += dy[off + i];
    mean_dy_xhat += dy[off + i] * xhat[off + i];
  }
  mean_dy /= d;
  mean_dy_xhat /= d;
  const double is = inv_std[r];
  for (int i = 0; i < d; ++i) {
    dx[off + i] +=
        is * (dy[off + i] - mean_dy - xhat[off + i] * mean_dy_xhat);
  }
}

}  // namespace skt::kernels::detail
