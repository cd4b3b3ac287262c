#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "astr/numerics.hpp"
#include "astr/random.hpp"
#include "astr/tensor.hpp"

// Per-frame self-attention refinement and cross-frame context fusion.
//
// Tokens are spatial positions, so a c×h×w feature map becomes an (h·w)×c
// token matrix. Attention is single-head.
namespace astr::context {

/// c×h×w activation grid.
using FeatureMap = Tensor;
/// n×c, one row per token.
using TokenMatrix = Tensor;

/// One transformer layer: q/k/v projections (c×d), output projection (d×c)
/// and a c→4c→c MLP.
struct AttentionWeights {
  Tensor wq, wk, wv;
  Tensor wo;
  Tensor mlp_in;   // c×4c
  std::vector<double> mlp_in_bias;
  Tensor mlp_out;  // 4c×c
  std::vector<double> mlp_out_bias;

  std::size_t channels() const { return wq.extent(0); }
  std::size_t proj_dim() const { return wq.extent(1); }

  /// Throws DimensionError when the matrices do not fit together.
  void validate() const;

  /// Matrices uniform in [-1/√c, 1/√c], biases zero.
  static AttentionWeights init(std::size_t channels, std::size_t proj_dim, Rng& rng);
};

/// Intermediate values of one attention pass, for inspection and tests.
struct AttentionTrace {
  Tensor logits;     // q·kᵀ/√d, n×m
  Tensor attention;  // row-stochastic, n×m
  Tensor attended;   // A·v·Wo before the residual, n×c
};

/// MAC tallies of the two stages whose cost grows with the key count m.
struct FusionMacs {
  numerics::MacCounter logit;  // q·kᵀ
  numerics::MacCounter value;  // A·v
};

/// Queries from `queries`, keys and values from `context`, followed by the
/// residual + LayerNorm and MLP sublayers.
TokenMatrix attention_layer(const TokenMatrix& queries, const TokenMatrix& context,
                            const AttentionWeights& w, AttentionTrace* trace = nullptr,
                            FusionMacs* macs = nullptr);

TokenMatrix self_attention_layer(const TokenMatrix& tokens, const AttentionWeights& w,
                                 AttentionTrace* trace = nullptr);

/// Fuses target tokens `p` with reference context `r`. `r` must be non-empty;
/// callers guarantee that through the sparse-sampling fallback.
TokenMatrix cross_attention_fuse(const TokenMatrix& p, const TokenMatrix& r,
                                 const AttentionWeights& w, AttentionTrace* trace = nullptr,
                                 FusionMacs* macs = nullptr);

TokenMatrix flatten_tokens(const FeatureMap& f);
FeatureMap unflatten_tokens(const TokenMatrix& tokens, std::size_t height, std::size_t width);

/// Fixed 2-D sinusoidal encoding, (h·w)×c. The first ⌊c/2⌋ channels encode
/// the row, the rest the column.
Tensor position_encoding(std::size_t height, std::size_t width, std::size_t channels);

TokenMatrix refine_per_frame(const FeatureMap& f, std::span<const AttentionWeights> layers,
                             bool add_position_encoding = true);

}  // namespace astr::context
