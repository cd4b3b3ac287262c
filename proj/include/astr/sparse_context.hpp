#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "astr/context_transformer.hpp"
#include "astr/tensor.hpp"

// Sparse-context block: shrinks each reference frame to the few tokens that a
// coarse lesion mask marks as relevant.
namespace astr::scb {

using context::FeatureMap;
using context::TokenMatrix;

/// Conv kernel plus bias.
struct ConvLayer {
  Tensor kernel;  // c_out×c_in×k×k
  std::vector<double> bias;
};

/// Sigmoid output of the coarse-map decoder on the pooled grid, h×w in [0,1].
struct CoarseMask {
  Tensor values;

  std::size_t height() const { return values.extent(0); }
  std::size_t width() const { return values.extent(1); }
};

struct GridPos {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

/// Token rows gathered from one reference frame.
struct SparseContext {
  Tensor values;                 // n×c
  std::vector<GridPos> positions;  // pooled-grid cells, row-major ascending
  std::size_t frame_offset = 1;

  std::size_t token_count() const { return positions.size(); }
};

/// Logit-stage MAC counts of dense and sparse fusion. Dense attends over all
/// h·w·t tokens of the clip, sparse over m sampled tokens.
struct FusionCost {
  std::uint64_t dense_macs = 0;
  std::uint64_t sparse_macs = 0;
  std::size_t h = 0, w = 0, c = 0, t = 0, m = 0;
};

constexpr double kDefaultThreshold = 0.5;

/// Pooling window for the reference `offset` frames back: 2^offset.
std::size_t pooling_window(std::size_t offset);

/// Average-pool with K = 2^offset, then 3×3 conv (padding 1).
FeatureMap pool_and_refine(const FeatureMap& f, std::size_t offset, const ConvLayer& refine);

/// 1×1 conv to one channel, then sigmoid.
CoarseMask coarse_decode(const FeatureMap& f, const ConvLayer& decoder);

/// Tokens at cells with mask > threshold. An empty selection falls back to
/// the first arg-max cell, so at least one token is always returned.
SparseContext sparse_sample(const FeatureMap& f, const CoarseMask& mask,
                            double threshold = kDefaultThreshold, std::size_t frame_offset = 1);

/// Stacks the parts' tokens in increasing frame-offset order: m×c.
TokenMatrix build_reference_context(std::span<const SparseContext> parts);

FusionCost fusion_cost(std::size_t h, std::size_t w, std::size_t c, std::size_t t, std::size_t m);

}  // namespace astr::scb
