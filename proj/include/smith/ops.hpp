#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "smith/tape.hpp"

namespace smith {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kL2NormGuard = 1e-12;
inline constexpr double kMaskedScoreBias = -1e9;
inline constexpr double kProbClamp = 1e-7;

// Optional training-time dropout; default-constructed means evaluation mode.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool on() const { return rng != nullptr && rate > 0.0; }
};

Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);  // elementwise
Tensor scale(Tensor a, double s);
Tensor scale_by(Tensor a, Tensor s);  // s is a learnable 1x1 factor
Tensor matmul(Tensor a, Tensor b);
Tensor matmul_nt(Tensor a, Tensor b);  // a * b^T
Tensor transpose(Tensor a);

// Broadcasts v (1 x cols) over every row of x.
Tensor add_row_vector(Tensor x, Tensor v);
Tensor affine(Tensor x, Tensor w, Tensor b);  // matmul + bias row

Tensor softmax_rows(Tensor x);
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias);
Tensor gelu(Tensor x);
Tensor sigmoid(Tensor x);

Tensor gather_rows(Tensor x, std::vector<int> row_ids);
// Copies x with the given rows overwritten by `row` (1 x cols). Row ids must
// be unique and in range.
Tensor replace_rows(Tensor x, std::vector<int> row_ids, Tensor row);
Tensor slice_cols(Tensor x, int start, int n);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor sum_rows(Tensor x);   // 1 x cols
Tensor mean_rows(Tensor x);  // 1 x cols
Tensor sum_all(Tensor x);    // 1 x 1

// Rows scaled to unit norm; rows with norm below the guard are scaled by
// 1/guard instead, so exact zero rows stay zero.
Tensor l2_normalize_rows(Tensor x);

Tensor dropout(Tensor x, const Dropout& ctx);

// Mean cross-entropy of target class ids against row-wise softmax.
Tensor softmax_cross_entropy(Tensor logits, std::vector<int> targets);
// Mean binary cross-entropy over probabilities, clamped to
// [kProbClamp, 1-kProbClamp] before the logs.
Tensor binary_cross_entropy(Tensor probs, std::vector<double> labels);

// softmax(q k^T / sqrt(d) + bias) v for a single head; d is the width of q.
// key_mask marks usable keys (1) vs masked keys (0); empty means all usable.
// Masked keys receive kMaskedScoreBias before the softmax. Throws if every
// key is masked.
Tensor scaled_dot_product_attention(Tensor q, Tensor k, Tensor v,
                                    const std::vector<std::uint8_t>& key_mask,
                                    const Dropout& drop = {});

// Score-matrix elements materialized by scaled_dot_product_attention since
// the last reset; used by the attention budget profiler.
std::uint64_t& attention_entry_counter();

struct TransformerLayerParams {
  Tensor attn_query_w, attn_query_b;
  Tensor attn_key_w, attn_key_b;
  Tensor attn_value_w, attn_value_b;
  Tensor attn_out_w, attn_out_b;
  Tensor norm1_gain, norm1_bias;
  Tensor ff_in_w, ff_in_b;    // hidden -> 4*hidden
  Tensor ff_out_w, ff_out_b;  // 4*hidden -> hidden
  Tensor norm2_gain, norm2_bias;
};

Tensor multi_head_attention(Tensor x, const TransformerLayerParams& p, int heads,
                            const std::vector<std::uint8_t>& key_mask, const Dropout& drop = {});

// Post-norm residual wiring: out = LN(y + FFN(y)) with y = LN(x + MHA(x)).
Tensor transformer_layer(Tensor x, const TransformerLayerParams& p, int heads,
                         const std::vector<std::uint8_t>& key_mask, const Dropout& drop = {});

}  // namespace smith
