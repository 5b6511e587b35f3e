#include "skt/model.hpp"

#include <algorithm>
#include <cmath>

#include "skt/kernels.hpp"

namespace skt::model {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::ScalarDiff: return "scalardiff";
    case Variant::NoDiff: return "nodiff";
  }
  return "full";
}

std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "scalardiff") return Variant::ScalarDiff;
  if (s == "nodiff") return Variant::NoDiff;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (d <= 0) throw ConfigError("model: d must be positive");
  if (n_heads <= 0 || d % n_heads != 0) {
    throw ConfigError("model: d must be divisible by n_heads");
  }
  if (n_blocks < 1) throw ConfigError("model: n_blocks must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("model: dropout must be in [0,1)");
  }
  if (n_kcs <= 0 || n_questions <= 0) {
    throw ConfigError("model: vocabulary sizes must be positive");
  }
}

namespace {

Tensor uniform_matrix(Rng& rng, std::vector<int> shape, double bound) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    (*t.data)[i] = rng.uniform(-bound, bound);
  }
  return t;
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int d = config.d;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(config.seed);

  p.kc_embed = uniform_matrix(rng, {config.n_kcs + 1, d}, bound);
  if (config.variant != Variant::NoDiff) {
    p.kc_variation = uniform_matrix(rng, {config.n_kcs + 1, d}, bound);
    const int diff_cols = config.variant == Variant::ScalarDiff ? 1 : d;
    p.q_diff = uniform_matrix(rng, {config.n_questions + 1, diff_cols}, bound);
  }
  p.resp_embed = uniform_matrix(rng, {2, d}, bound);
  p.blocks.resize(static_cast<std::size_t>(config.n_blocks));
  for (auto& b : p.blocks) {
    b.wq = uniform_matrix(rng, {d, d}, bound);
    b.wk = uniform_matrix(rng, {d, d}, bound);
    b.wv = uniform_matrix(rng, {d, d}, bound);
    b.wo = uniform_matrix(rng, {d, d}, bound);
  }
  p.head_w1 = uniform_matrix(rng, {2 * d, d}, bound);
  p.head_b1 = Tensor::zeros({d}, true);
  p.head_w2 = uniform_matrix(rng, {d, d}, bound);
  p.head_b2 = Tensor::zeros({d}, true);
  p.head_w = uniform_matrix(rng, {d, 1}, bound);
  p.head_b = Tensor::zeros({1}, true);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("kc_embed", &kc_embed);
  if (config.variant != Variant::NoDiff) {
    out.emplace_back("kc_variation", &kc_variation);
    out.emplace_back("q_diff", &q_diff);
  }
  out.emplace_back("resp_embed", &resp_embed);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    out.emplace_back(prefix + "wq", &blocks[i].wq);
    out.emplace_back(prefix + "wk", &blocks[i].wk);
    out.emplace_back(prefix + "wv", &blocks[i].wv);
    out.emplace_back(prefix + "wo", &blocks[i].wo);
  }
  out.emplace_back("head.w1", &head_w1);
  out.emplace_back("head.b1", &head_b1);
  out.emplace_back("head.w2", &head_w2);
  out.emplace_back("head.b2", &head_b2);
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  auto mut = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named()) t->zero_grad();
}

ModelParams clone_params(const ModelParams& params) {
  ModelParams copy;
  copy.config = params.config;
  copy.blocks.resize(params.blocks.size());
  auto src = params.named();
  auto dst = copy.named();
  for (std::size_t i = 0; i < src.size(); ++i) {
    *dst[i].second = Tensor::from(*src[i].second->data, src[i].second->shape, true);
  }
  return copy;
}

namespace {

// ---- embedding combine -------------------------------------------------
// x = Z[kc] (+ M[q] * V[kc] per variant); y = Z[kc] + R[response].
// The backward scatter stays serial so accumulation order is fixed.
std::pair<Tensor, Tensor> embed_combine(Tape* tape, ModelParams& p,
                                        const data::Batch& batch) {
  const int d = p.config.d;
  const int rows = batch.B * batch.L;
  const Variant variant = p.config.variant;
  const int n_kc_rows = p.kc_embed.dim(0);
  const int n_q_rows = variant == Variant::NoDiff ? 0 : p.q_diff.dim(0);

  Tensor x = Tensor::zeros({rows, d}, tape != nullptr);
  Tensor y = Tensor::zeros({rows, d}, tape != nullptr);
  for (int i = 0; i < rows; ++i) {
    const int kc = batch.kc[static_cast<std::size_t>(i)];
    const int q = batch.question[static_cast<std::size_t>(i)];
    const int r = batch.response[static_cast<std::size_t>(i)];
    if (kc < 0 || kc >= n_kc_rows) {
      throw DataError("embed: kc index " + std::to_string(kc) + " out of range");
    }
    if (r != 0 && r != 1) throw DataError("embed: response must be 0 or 1");
    const double* z = p.kc_embed.ptr() + static_cast<std::size_t>(kc) * d;
    const double* rr = p.resp_embed.ptr() + static_cast<std::size_t>(r) * d;
    double* xi = x.ptr() + static_cast<std::size_t>(i) * d;
    double* yi = y.ptr() + static_cast<std::size_t>(i) * d;
    if (variant == Variant::NoDiff) {
      for (int c = 0; c < d; ++c) xi[c] = z[c];
    } else {
      if (q < 0 || q >= n_q_rows) {
        throw DataError("embed: question index " + std::to_string(q) +
                        " out of range");
      }
      const double* v = p.kc_variation.ptr() + static_cast<std::size_t>(kc) * d;
      if (variant == Variant::Full) {
        const double* m = p.q_diff.ptr() + static_cast<std::size_t>(q) * d;
        for (int c = 0; c < d; ++c) xi[c] = z[c] + m[c] * v[c];
      } else {
        const double m = p.q_diff.at(q, 0);
        for (int c = 0; c < d; ++c) xi[c] = z[c] + m * v[c];
      }
    }
    for (int c = 0; c < d; ++c) yi[c] = z[c] + rr[c];
  }
  check_finite(x.ptr(), x.numel(), "embed");
  check_finite(y.ptr(), y.numel(), "embed");

  if (tape) {
    Tensor xc = x, yc = y;
    Tensor z = p.kc_embed, v = p.kc_variation, m = p.q_diff, r = p.resp_embed;
    auto kc_idx = std::make_shared<std::vector<int>>(batch.kc);
    auto q_idx = std::make_shared<std::vector<int>>(batch.question);
    auto r_idx = std::make_shared<std::vector<int>>(batch.response);
    tape->record(x, [=]() mutable {
      for (int i = 0; i < rows; ++i) {
        const int kc = (*kc_idx)[static_cast<std::size_t>(i)];
        const double* gx = xc.gptr() + static_cast<std::size_t>(i) * d;
        double* gz = z.gptr() + static_cast<std::size_t>(kc) * d;
        if (variant == Variant::NoDiff) {
          for (int c = 0; c < d; ++c) gz[c] += gx[c];
          continue;
        }
        const int q = (*q_idx)[static_cast<std::size_t>(i)];
        const double* vv = v.ptr() + static_cast<std::size_t>(kc) * d;
        double* gv = v.gptr() + static_cast<std::size_t>(kc) * d;
        if (variant == Variant::Full) {
          const double* mm = m.ptr() + static_cast<std::size_t>(q) * d;
          double* gm = m.gptr() + static_cast<std::size_t>(q) * d;
          for (int c = 0; c < d; ++c) {
            gz[c] += gx[c];
            gm[c] += gx[c] * vv[c];
            gv[c] += gx[c] * mm[c];
          }
        } else {
          const double mm = m.at(q, 0);
          double acc = 0.0;
          for (int c = 0; c < d; ++c) {
            gz[c] += gx[c];
            acc += gx[c] * vv[c];
            gv[c] += gx[c] * mm;
          }
          (*m.grad)[static_cast<std::size_t>(q)] += acc;
        }
      }
    });
    tape->record(y, [=]() mutable {
      for (int i = 0; i < rows; ++i) {
        const int kc = (*kc_idx)[static_cast<std::size_t>(i)];
        const int r_i = (*r_idx)[static_cast<std::size_t>(i)];
        const double* gy = yc.gptr() + static_cast<std::size_t>(i) * d;
        double* gz = z.gptr() + static_cast<std::size_t>(kc) * d;
        double* gr = r.gptr() + static_cast<std::size_t>(r_i) * d;
        for (int c = 0; c < d; ++c) {
          gz[c] += gy[c];
          gr[c] += gy[c];
        }
      }
    });
  }
  return {x, y};
}

// ---- fused multi-head attention core ------------------------------------
Tensor sdpa(Tape* tape, const Tensor& qp, const Tensor& kp, const Tensor& vp,
            int B, int L, int heads,
            std::shared_ptr<std::vector<int>> key_limit,
            std::shared_ptr<std::vector<std::uint8_t>> valid, double dropout_p,
            bool training, Rng* rng) {
  const int d = qp.dim(1);
  const std::size_t prob_size = static_cast<std::size_t>(B) * heads * L * L;
  auto probs = std::make_shared<std::vector<double>>(prob_size, 0.0);

  std::shared_ptr<std::vector<std::uint8_t>> drop_mask;
  double keep_scale = 1.0;
  if (training && dropout_p > 0.0) {
    if (!rng) throw ConfigError("attention dropout needs an rng at training time");
    drop_mask = std::make_shared<std::vector<std::uint8_t>>(prob_size);
    const std::uint64_t seed = rng->next_u64();
    const std::uint64_t threshold =
        static_cast<std::uint64_t>(dropout_p * 18446744073709551616.0);
    for (std::size_t i = 0; i < prob_size; ++i) {
      std::uint64_t c = seed + i;
      (*drop_mask)[i] = Rng::splitmix64(c) >= threshold;
    }
    keep_scale = 1.0 / (1.0 - dropout_p);
  }

  const bool rg = tape != nullptr &&
                  (qp.requires_grad || kp.requires_grad || vp.requires_grad);
  Tensor out = Tensor::zeros({B * L, d}, rg);
  kernels::SdpaArgs args{qp.ptr(),          kp.ptr(),
                         vp.ptr(),          key_limit->data(),
                         valid->data(),     drop_mask ? drop_mask->data() : nullptr,
                         keep_scale,        B,
                         L,                 d,
                         heads};
  kernels::sdpa_forward(out.ptr(), probs->data(), args);
  check_finite(out.ptr(), out.numel(), "attention");

  if (rg) {
    Tensor qc = qp, kc = kp, vc = vp, oc = out;
    tape->record(out, [=]() mutable {
      kernels::SdpaArgs bargs{qc.ptr(),      kc.ptr(),
                              vc.ptr(),      key_limit->data(),
                              valid->data(), drop_mask ? drop_mask->data() : nullptr,
                              keep_scale,    B,
                              L,             d,
                              heads};
      kernels::sdpa_backward(qc.gptr(), kc.gptr(), vc.gptr(), oc.gptr(),
                             probs->data(), bargs);
    });
  }
  return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x) {
  const int rows = x.dim(0), d = x.dim(1);
  const bool rg = tape != nullptr && x.requires_grad;
  Tensor out = Tensor::zeros(x.shape, rg);
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  kernels::layernorm_forward(out.ptr(), xhat->data(), inv_std->data(), x.ptr(),
                             rows, d);
  check_finite(out.ptr(), out.numel(), "layer_norm");
  if (rg) {
    Tensor xc = x, oc = out;
    tape->record(out, [=]() mutable {
      kernels::layernorm_backward_acc(xc.gptr(), oc.gptr(), xhat->data(),
                                      inv_std->data(), rows, d);
    });
  }
  return out;
}

// Stacked attention: block 0 queries the raw KC representations against the
// interaction history; later blocks re-attend with their own projections,
// queries and values carried forward from the previous block's output and a
// residual + normalization wrapper.
Tensor attention_stack(Tape* tape, const Tensor& x_flat, const Tensor& y_flat,
                       ModelParams& p, int B, int L,
                       std::shared_ptr<std::vector<int>> key_limit,
                       std::shared_ptr<std::vector<std::uint8_t>> valid,
                       bool training, Rng* rng) {
  Tensor cur_q = x_flat;
  Tensor cur_v = y_flat;
  Tensor h;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    auto& blk = p.blocks[k];
    Tensor qp = ops::matmul(tape, cur_q, blk.wq);
    Tensor kp = ops::matmul(tape, x_flat, blk.wk);
    Tensor vp = ops::matmul(tape, cur_v, blk.wv);
    Tensor att = sdpa(tape, qp, kp, vp, B, L, p.config.n_heads, key_limit,
                      valid, p.config.dropout, training, rng);
    Tensor ao = ops::matmul(tape, att, blk.wo);
    if (k == 0) {
      h = ao;
    } else {
      h = layer_norm(tape, ops::add(tape, cur_q, ao));
    }
    cur_q = h;
    cur_v = h;
  }
  return h;
}

Tensor head_forward(Tape* tape, const Tensor& h_flat, const Tensor& x_flat,
                    ModelParams& p, bool training, Rng* rng) {
  Rng fallback(0);
  Rng& r = rng ? *rng : fallback;
  Tensor cat = ops::concat(tape, h_flat, x_flat);
  Tensor h1 = ops::relu(
      tape, ops::add_bias(tape, ops::matmul(tape, cat, p.head_w1), p.head_b1));
  h1 = ops::dropout(tape, h1, p.config.dropout, training, r);
  Tensor h2 = ops::relu(
      tape, ops::add_bias(tape, ops::matmul(tape, h1, p.head_w2), p.head_b2));
  h2 = ops::dropout(tape, h2, p.config.dropout, training, r);
  return ops::add_bias(tape, ops::matmul(tape, h2, p.head_w), p.head_b);
}

}  // namespace

Forward forward_sequence(Tape* tape, const data::Batch& batch,
                         ModelParams& params, bool training, Rng* rng,
                         const std::vector<int>* key_limit) {
  params.config.validate();
  const int B = batch.B, L = batch.L;
  const std::size_t total = static_cast<std::size_t>(B) * L;
  if (batch.kc.size() != total || batch.valid.size() != total) {
    throw DimensionError("forward_sequence: batch arrays disagree with B*L");
  }
  if (training && params.config.dropout > 0.0 && rng == nullptr) {
    throw ConfigError("forward_sequence: training with dropout needs an rng");
  }
  if (key_limit && key_limit->size() != total) {
    throw DimensionError("forward_sequence: key_limit size must be B*L");
  }

  auto limits = std::make_shared<std::vector<int>>(total);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < L; ++t) {
      const std::size_t i = static_cast<std::size_t>(b) * L + t;
      int lim = t;  // strictly-past causal horizon
      if (key_limit) lim = std::min(lim, (*key_limit)[i]);
      (*limits)[i] = std::max(0, lim);
    }
  }
  auto valid = std::make_shared<std::vector<std::uint8_t>>(batch.valid);

  auto [x, y] = embed_combine(tape, params, batch);
  Tensor h = attention_stack(tape, x, y, params, B, L, limits, valid, training, rng);
  Tensor logit_col = head_forward(tape, h, x, params, training, rng);

  Forward fw;
  fw.logits = reshape(logit_col, {B, L});
  fw.pred_mask.assign(total, 0);
  for (int b = 0; b < B; ++b) {
    for (int t = 1; t < L; ++t) {
      const std::size_t i = static_cast<std::size_t>(b) * L + t;
      fw.pred_mask[i] = batch.valid[i];
    }
  }
  return fw;
}

std::pair<Tensor, Tensor> embed_step(int kc, int question, int response,
                                     const ModelParams& params) {
  data::Batch b;
  b.B = 1;
  b.L = 1;
  b.kc = {kc};
  b.question = {question};
  b.response = {response};
  b.interaction = {0};
  b.valid = {1};
  auto& mut = const_cast<ModelParams&>(params);
  auto [x, y] = embed_combine(nullptr, mut, b);
  return {reshape(x, {params.config.d}), reshape(y, {params.config.d})};
}

Tensor knowledge_state(const Tensor& x_query, const Tensor* x_hist,
                       const Tensor* y_hist, ModelParams& params) {
  const int d = params.config.d;
  if (x_query.rank() != 1 || x_query.dim(0) != d) {
    throw DimensionError("knowledge_state: x_query must be [d]");
  }
  const int t = x_hist ? x_hist->dim(0) : 0;
  if ((x_hist == nullptr) != (y_hist == nullptr)) {
    throw DimensionError("knowledge_state: history tensors must come together");
  }
  if (x_hist && (x_hist->rank() != 2 || x_hist->dim(1) != d ||
                 y_hist->shape != x_hist->shape)) {
    throw DimensionError("knowledge_state: history must be [t x d] pairs");
  }
  if (t == 0) return Tensor::zeros({d});

  const int L = t + 1;
  Tensor x_flat = Tensor::zeros({L, d});
  Tensor y_flat = Tensor::zeros({L, d});
  for (int i = 0; i < t; ++i) {
    for (int c = 0; c < d; ++c) {
      x_flat.at(i, c) = x_hist->at(i, c);
      y_flat.at(i, c) = y_hist->at(i, c);
    }
  }
  for (int c = 0; c < d; ++c) x_flat.at(t, c) = x_query.at(c);

  auto limits = std::make_shared<std::vector<int>>(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) (*limits)[static_cast<std::size_t>(i)] = i;
  auto valid = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(L), std::uint8_t{1});
  Tensor h = attention_stack(nullptr, x_flat, y_flat, params, 1, L, limits,
                             valid, false, nullptr);
  Tensor out = Tensor::zeros({d});
  for (int c = 0; c < d; ++c) out.at(c) = h.at(t, c);
  return out;
}

Tensor predict_logit(const Tensor& h, const Tensor& x, ModelParams& params) {
  const int d = params.config.d;
  if (h.rank() != 1 || h.dim(0) != d || x.rank() != 1 || x.dim(0) != d) {
    throw DimensionError("predict_logit: h and x must be [d]");
  }
  Tensor logit = head_forward(nullptr, reshape(h, {1, d}), reshape(x, {1, d}),
                              params, false, nullptr);
  return reshape(logit, {1});
}

}  // namespace skt::model
