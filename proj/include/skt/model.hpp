#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skt/data.hpp"
#include "skt/ops.hpp"
#include "skt/rng.hpp"
#include "skt/tensor.hpp"

namespace skt::model {

// Full: question difficulty vector m_q modulates the KC variation vector.
// ScalarDiff: m_q collapses to a scalar. NoDiff: no difficulty modeling.
enum class Variant { Full, ScalarDiff, NoDiff };

std::string variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& s);

struct ModelConfig {
  int d = 64;
  int n_kcs = 0;
  int n_questions = 0;
  int n_blocks = 1;
  int n_heads = 4;
  double dropout = 0.05;
  Variant variant = Variant::Full;
  std::uint64_t seed = 42;

  void validate() const;
};

struct AttentionBlock {
  Tensor wq, wk, wv, wo;  // [d x d] each
};

// Embedding tables carry one extra trailing row reserved for ids that were
// not in the training vocabulary.
struct ModelParams {
  ModelConfig config;
  Tensor kc_embed;      // [(n_kcs+1) x d]
  Tensor kc_variation;  // [(n_kcs+1) x d]; absent under NoDiff
  Tensor q_diff;        // [(n_questions+1) x d]; [(n_questions+1) x 1] under ScalarDiff; absent under NoDiff
  Tensor resp_embed;    // [2 x d]
  std::vector<AttentionBlock> blocks;
  Tensor head_w1;  // [2d x d]
  Tensor head_b1;  // [d]
  Tensor head_w2;  // [d x d]
  Tensor head_b2;  // [d]
  Tensor head_w;   // [d x 1]
  Tensor head_b;   // [1]

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  void zero_grad();
};

// Seeded init: matrices uniform in [-1/sqrt(d), 1/sqrt(d)], biases zero.
ModelParams init_params(const ModelConfig& config);
ModelParams clone_params(const ModelParams& params);

struct Forward {
  Tensor logits;                        // [B x L]
  std::vector<std::uint8_t> pred_mask;  // one-step predictable positions
};

// Batched forward pass. Position t's query attends to strictly earlier
// positions of the same chunk (or fewer where key_limit clamps the visible
// history, as in multi-step evaluation); position 0 sees an empty history
// and produces h = 0. pred_mask marks valid positions with t > 0.
Forward forward_sequence(Tape* tape, const data::Batch& batch,
                         ModelParams& params, bool training, Rng* rng,
                         const std::vector<int>* key_limit = nullptr);

// Single-step views of the same computation.
std::pair<Tensor, Tensor> embed_step(int kc, int question, int response,
                                     const ModelParams& params);
// x_hist/y_hist may be null for an empty history (returns the zero vector).
Tensor knowledge_state(const Tensor& x_query, const Tensor* x_hist,
                       const Tensor* y_hist, ModelParams& params);
Tensor predict_logit(const Tensor& h, const Tensor& x, ModelParams& params);

}  // namespace skt::model
