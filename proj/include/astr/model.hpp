#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "astr/context_transformer.hpp"
#include "astr/image.hpp"
#include "astr/sparse_context.hpp"

// End-to-end forward pass: backbone, per-frame refinement, sparse reference
// contexts, cross-attention fusion, up-sampling decoder and head.
namespace astr::model {

using context::FeatureMap;
using scb::ConvLayer;

/// Stand-in CNN: each stage is conv3×3 + ReLU + 2×2 average pooling, so the
/// total stride is 2^stages.
struct BackboneConfig {
  std::vector<std::size_t> stage_channels{16, 32, 32};
  std::size_t stride = 8;
  std::uint64_t seed = 0;

  std::size_t out_channels() const { return stage_channels.back(); }
  std::size_t stages() const { return stage_channels.size(); }
  void validate() const;

  /// Widths double from 8 and saturate at `channels`; the last stage is `channels`.
  static BackboneConfig for_stride(std::size_t stride, std::size_t channels, std::uint64_t seed = 0);

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t sa_layers = 2;
  std::size_t proj_dim = 32;
  std::size_t frames = 3;  // T, target plus T-1 references
  double threshold = scb::kDefaultThreshold;

  std::size_t channels() const { return backbone.out_channels(); }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Backbone {
  BackboneConfig config;
  std::vector<ConvLayer> stages;

  /// Seeded from config.seed.
  explicit Backbone(BackboneConfig cfg);
  Backbone(BackboneConfig cfg, std::vector<ConvLayer> weights);

  /// Throws ParameterError unless the stride divides both extents.
  FeatureMap forward(const Image& frame) const;
};

FeatureMap backbone_forward(const Image& frame, const BackboneConfig& cfg);

struct ModelWeights {
  ModelConfig config;
  Backbone backbone{BackboneConfig{}};
  std::vector<context::AttentionWeights> self_attention;
  context::AttentionWeights cross_attention;
  std::vector<ConvLayer> reference_refine;  // one per offset 1..T-1
  ConvLayer coarse_decoder;
  std::vector<ConvLayer> decoder;           // log2(stride) up-sampling stages
  ConvLayer head;

  /// Seeded from cfg.backbone.seed.
  static ModelWeights init(const ModelConfig& cfg);

  /// Throws DimensionError when any tensor disagrees with `config`.
  void validate() const;
};

struct VideoClip {
  std::vector<Image> frames;              // frames[0] is the target
  std::vector<Image> masks;               // empty or one per frame
  std::vector<std::size_t> frame_times;   // source-video indices

  std::size_t length() const { return frames.size(); }
  void validate() const;
};

/// Frames t, t-1, …, t-(T-1), clamped at 0 so early clips repeat frame 0.
VideoClip clip_sample(std::span<const Image> video, std::size_t t, std::size_t length,
                      std::span<const Image> masks = {});

struct SegmentationOutput {
  Tensor prob_mask;                         // input h×w, values in [0,1]
  std::vector<scb::CoarseMask> coarse_masks;  // one per reference
  std::vector<std::size_t> token_counts;
  std::size_t feature_height = 0;
  std::size_t feature_width = 0;
};

struct ForwardOptions {
  std::size_t threads = 1;  // reference frames processed concurrently when > 1
};

/// Internals exposed for tests and the CLI record.
struct ForwardTrace {
  context::TokenMatrix target_context;     // p
  context::TokenMatrix reference_context;  // r, empty when T=1
  context::FusionMacs fusion_macs;
};

SegmentationOutput astr_forward(const VideoClip& clip, const ModelWeights& weights,
                                const ForwardOptions& options = {}, ForwardTrace* trace = nullptr);

}  // namespace astr::model
