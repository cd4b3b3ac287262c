#include "astr/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <future>
#include <string>

#include "astr/error.hpp"
#include "astr/numerics.hpp"
#include "astr/random.hpp"

namespace astr::model {

namespace {

ConvLayer random_conv(std::size_t c_out, std::size_t c_in, std::size_t k, Rng& rng) {
  ConvLayer layer{Tensor({c_out, c_in, k, k}), std::vector<double>(c_out, 0.0)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
  for (auto& v : layer.kernel.data()) v = rng.uniform(-bound, bound);
  return layer;
}

void expect_conv(const ConvLayer& layer, std::size_t c_out, std::size_t c_in, std::size_t k,
                 const std::string& name) {
  const Shape want{c_out, c_in, k, k};
  if (layer.kernel.shape() != want || layer.bias.size() != c_out) {
    throw DimensionError("model weights: " + name + " is " + shape_string(layer.kernel.shape()) +
                         ", expected " + shape_string(want));
  }
}

std::size_t decoder_width(std::size_t in) { return std::max(in / 2, std::min<std::size_t>(in, 4)); }

struct ReferenceResult {
  scb::CoarseMask mask;
  scb::SparseContext context;
};

ReferenceResult process_reference(const Image& frame, std::size_t offset, const ModelWeights& w) {
  const FeatureMap f = w.backbone.forward(frame);
  const FeatureMap pooled = scb::pool_and_refine(f, offset, w.reference_refine.at(offset - 1));
  scb::CoarseMask mask = scb::coarse_decode(pooled, w.coarse_decoder);
  scb::SparseContext ctx = scb::sparse_sample(pooled, mask, w.config.threshold, offset);
  return {std::move(mask), std::move(ctx)};
}

}  // namespace

void BackboneConfig::validate() const {
  if (stage_channels.empty()) throw ParameterError("backbone: needs at least one stage");
  if (std::any_of(stage_channels.begin(), stage_channels.end(), [](std::size_t c) { return c == 0; })) {
    throw ParameterError("backbone: stage widths must be positive");
  }
  if (!std::has_single_bit(stride) || stride != (std::size_t{1} << stage_channels.size())) {
    throw ParameterError("backbone: stride " + std::to_string(stride) + " must equal 2^stages (" +
                         std::to_string(stage_channels.size()) + " stages)");
  }
}

BackboneConfig BackboneConfig::for_stride(std::size_t stride, std::size_t channels, std::uint64_t seed) {
  if (!std::has_single_bit(stride) || stride < 2) {
    throw ParameterError("backbone stride must be a power of two >= 2, got " + std::to_string(stride));
  }
  if (channels == 0) throw ParameterError("backbone channels must be positive");
  BackboneConfig cfg;
  cfg.stride = stride;
  cfg.seed = seed;
  cfg.stage_channels.clear();
  const auto stages = static_cast<std::size_t>(std::countr_zero(stride));
  for (std::size_t i = 0; i < stages; ++i) cfg.stage_channels.push_back(std::min(channels, std::size_t{8} << i));
  cfg.stage_channels.back() = channels;
  return cfg;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (sa_layers < 1) throw ParameterError("model: needs at least one self-attention layer");
  if (proj_dim < 1) throw ParameterError("model: projection width must be >= 1");
  if (frames < 1) throw ParameterError("model: clip length T must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ParameterError("model: threshold must lie in [0,1]");
}

Backbone::Backbone(BackboneConfig cfg) : config(std::move(cfg)) {
  config.validate();
  Rng rng(config.seed);
  std::size_t c_in = 1;
  for (std::size_t c : config.stage_channels) {
    stages.push_back(random_conv(c, c_in, 3, rng));
    c_in = c;
  }
}

Backbone::Backbone(BackboneConfig cfg, std::vector<ConvLayer> weights)
    : config(std::move(cfg)), stages(std::move(weights)) {
  config.validate();
  if (stages.size() != config.stages()) throw DimensionError("backbone: stage count mismatch");
  std::size_t c_in = 1;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    expect_conv(stages[i], config.stage_channels[i], c_in, 3, "backbone.stage" + std::to_string(i));
    c_in = config.stage_channels[i];
  }
}

FeatureMap Backbone::forward(const Image& frame) const {
  if (frame.width % config.stride != 0 || frame.height % config.stride != 0) {
    throw ParameterError("backbone: stride " + std::to_string(config.stride) + " does not divide " +
                         std::to_string(frame.width) + "x" + std::to_string(frame.height));
  }
  FeatureMap x = to_unit_tensor(frame).reshaped({1, frame.height, frame.width});
  for (const auto& stage : stages) {
    x = numerics::relu(numerics::conv2d(x, stage.kernel, 1, stage.bias));
    x = numerics::avg_pool2d(x, 2);
  }
  return x;
}

FeatureMap backbone_forward(const Image& frame, const BackboneConfig& cfg) {
  return Backbone(cfg).forward(frame);
}

ModelWeights ModelWeights::init(const ModelConfig& cfg) {
  cfg.validate();
  ModelWeights w;
  w.config = cfg;
  w.backbone = Backbone(cfg.backbone);
  const std::size_t c = cfg.channels();
  Rng rng(cfg.backbone.seed ^ 0x9E3779B97F4A7C15ULL);
  for (std::size_t i = 0; i < cfg.sa_layers; ++i)
    w.self_attention.push_back(context::AttentionWeights::init(c, cfg.proj_dim, rng));
  w.cross_attention = context::AttentionWeights::init(c, cfg.proj_dim, rng);
  for (std::size_t i = 1; i < cfg.frames; ++i) w.reference_refine.push_back(random_conv(c, c, 3, rng));
  w.coarse_decoder = random_conv(1, c, 1, rng);
  std::size_t width = c;
  for (std::size_t i = 0; i < cfg.backbone.stages(); ++i) {
    const std::size_t next = decoder_width(width);
    w.decoder.push_back(random_conv(next, width, 3, rng));
    width = next;
  }
  w.head = random_conv(1, width, 1, rng);
  return w;
}

void ModelWeights::validate() const {
  config.validate();
  if (!(backbone.config == config.backbone)) throw DimensionError("model weights: backbone config mismatch");
  const std::size_t c = config.channels();
  if (self_attention.size() != config.sa_layers) throw DimensionError("model weights: wrong self-attention layer count");
  for (const auto& layer : self_attention) {
    layer.validate();
    if (layer.channels() != c || layer.proj_dim() != config.proj_dim)
      throw DimensionError("model weights: self-attention layer width mismatch");
  }
  cross_attention.validate();
  if (cross_attention.channels() != c || cross_attention.proj_dim() != config.proj_dim)
    throw DimensionError("model weights: cross-attention width mismatch");
  if (reference_refine.size() + 1 != config.frames) throw DimensionError("model weights: wrong reference refine count");
  for (std::size_t i = 0; i < reference_refine.size(); ++i)
    expect_conv(reference_refine[i], c, c, 3, "scb.refine" + std::to_string(i + 1));
  expect_conv(coarse_decoder, 1, c, 1, "scb.decoder");
  if (decoder.size() != config.backbone.stages()) throw DimensionError("model weights: wrong decoder stage count");
  std::size_t width = c;
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    expect_conv(decoder[i], decoder_width(width), width, 3, "decoder" + std::to_string(i));
    width = decoder_width(width);
  }
  expect_conv(head, 1, width, 1, "head");
}

void VideoClip::validate() const {
  if (frames.empty()) throw ParameterError("video clip has no frames");
  for (const auto& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height)
      throw DimensionError("video clip frames differ in extents");
    if (f.mode != frames[0].mode) throw ParameterError("video clip frames differ in scan mode");
  }
  if (!masks.empty()) {
    if (masks.size() != frames.size()) throw DimensionError("video clip mask count differs from frame count");
    for (const auto& m : masks)
      if (m.width != frames[0].width || m.height != frames[0].height)
        throw DimensionError("video clip mask extents differ from frames");
  }
}

VideoClip clip_sample(std::span<const Image> video, std::size_t t, std::size_t length,
                      std::span<const Image> masks) {
  if (video.empty()) throw ParameterError("clip_sample: video is empty");
  if (length < 1) throw ParameterError("clip_sample: clip length must be >= 1");
  if (t >= video.size()) {
    throw ParameterError("clip_sample: index " + std::to_string(t) + " beyond video of " +
                         std::to_string(video.size()) + " frames");
  }
  if (!masks.empty() && masks.size() != video.size()) {
    throw DimensionError("clip_sample: mask count differs from frame count");
  }
  VideoClip clip;
  for (std::size_t k = 0; k < length; ++k) {
    const std::size_t idx = k > t ? 0 : t - k;
    clip.frames.push_back(video[idx]);
    if (!masks.empty()) clip.masks.push_back(masks[idx]);
    clip.frame_times.push_back(idx);
  }
  clip.validate();
  return clip;
}

SegmentationOutput astr_forward(const VideoClip& clip, const ModelWeights& weights,
                                const ForwardOptions& options, ForwardTrace* trace) {
  clip.validate();
  if (clip.length() > weights.config.frames) {
    throw ParameterError("astr_forward: clip of " + std::to_string(clip.length()) +
                         " frames exceeds configured T=" + std::to_string(weights.config.frames));
  }
  const Image& target = clip.frames[0];
  const FeatureMap f_t = weights.backbone.forward(target);
  const std::size_t fh = f_t.extent(1), fw = f_t.extent(2);
  context::TokenMatrix p = context::refine_per_frame(f_t, weights.self_attention);

  SegmentationOutput out;
  out.feature_height = fh;
  out.feature_width = fw;

  const std::size_t refs = clip.length() - 1;
  std::vector<ReferenceResult> results;
  results.reserve(refs);
  if (options.threads > 1 && refs > 1) {
    std::vector<std::future<ReferenceResult>> pending;
    for (std::size_t i = 1; i <= refs; ++i) {
      pending.push_back(std::async(std::launch::async, [&, i] {
        return process_reference(clip.frames[i], i, weights);
      }));
    }
    for (auto& fut : pending) results.push_back(fut.get());
  } else {
    for (std::size_t i = 1; i <= refs; ++i) results.push_back(process_reference(clip.frames[i], i, weights));
  }

  context::TokenMatrix y = p;
  context::TokenMatrix r;
  context::FusionMacs macs;
  if (refs > 0) {
    std::vector<scb::SparseContext> parts;
    for (auto& res : results) {
      out.token_counts.push_back(res.context.token_count());
      out.coarse_masks.push_back(std::move(res.mask));
      parts.push_back(std::move(res.context));
    }
    r = scb::build_reference_context(parts);
    y = context::cross_attention_fuse(p, r, weights.cross_attention, nullptr, &macs);
  }

  FeatureMap x = context::unflatten_tokens(y, fh, fw);
  for (const auto& stage : weights.decoder) {
    x = numerics::upsample_bilinear(x, 2);
    x = numerics::relu(numerics::conv2d(x, stage.kernel, 1, stage.bias));
  }
  Tensor logits = numerics::conv2d(x, weights.head.kernel, 0, weights.head.bias);
  out.prob_mask = numerics::sigmoid(std::move(logits)).reshaped({target.height, target.width});

  if (trace) {
    trace->target_context = std::move(p);
    trace->reference_context = std::move(r);
    trace->fusion_macs = macs;
  }
  return out;
}

}  // namespace astr::model
