#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "astr/asma.hpp"
#include "astr/bench.hpp"
#include "astr/cli.hpp"
#include "astr/context_transformer.hpp"
#include "astr/losses.hpp"
#include "astr/metrics.hpp"
#include "astr/model.hpp"
#include "astr/numerics.hpp"
#include "astr/random.hpp"
#include "astr/sparse_context.hpp"
#include "astr/synthetic.hpp"

namespace astr::harness {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

bool rows_stochastic(const Tensor& a, double tol) {
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.extent(1); ++j) {
      if (a.at(i, j) < 0.0) return false;
      s += a.at(i, j);
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

bool check_matmul_associativity() {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({4, 4}, rng), b = random_tensor({4, 4}, rng), c = random_tensor({4, 4}, rng);
    const Tensor l = numerics::matmul(numerics::matmul(a, b), c);
    const Tensor r = numerics::matmul(a, numerics::matmul(b, c));
    for (std::size_t i = 0; i < l.size(); ++i)
      if (std::abs(l[i] - r[i]) > 1e-9) return false;
  }
  return true;
}

bool check_softmax() {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor({1, 1 + rng.below(16)}, rng, -50.0, 50.0);
    if (!rows_stochastic(numerics::softmax_rows(x), 1e-12)) return false;
  }
  return true;
}

bool check_asma_roundtrip() {
  const Image img = band_limited_phantom(96, 96, 3);
  const auto geom = asma::oversampled(asma::default_geometry(96, 96), 2.0);
  return asma::roundtrip_error(img, geom) <= 2.0 / 255.0;
}

bool check_attention_rows() {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = context::AttentionWeights::init(8, 8, rng);
    const Tensor p = random_tensor({1 + rng.below(12), 8}, rng, -3.0, 3.0);
    const Tensor r = random_tensor({1 + rng.below(12), 8}, rng, -3.0, 3.0);
    context::AttentionTrace sa, ca;
    context::self_attention_layer(p, w, &sa);
    context::cross_attention_fuse(p, r, w, &ca);
    if (!rows_stochastic(sa.attention, 1e-12) || !rows_stochastic(ca.attention, 1e-12)) return false;
  }
  return true;
}

bool check_mac_count() {
  Rng rng(5);
  for (std::size_t h : {4, 5}) {
    for (std::size_t m : {1, 7, 20}) {
      const std::size_t c = 8;
      const auto w = context::AttentionWeights::init(c, c, rng);
      context::FusionMacs macs;
      context::cross_attention_fuse(random_tensor({h * h, c}, rng), random_tensor({m, c}, rng), w, nullptr, &macs);
      if (macs.logit.macs != scb::fusion_cost(h, h, c, 3, m).sparse_macs) return false;
    }
  }
  const auto cost = scb::fusion_cost(11, 11, 32, 3, 30);
  return cost.dense_macs == 1405536 && cost.sparse_macs == 116160;
}

bool check_pool_schedule() {
  const Tensor f({4, 11, 13}, 1.0);
  scb::ConvLayer conv{Tensor({4, 4, 3, 3}), std::vector<double>(4, 0.0)};
  for (std::size_t i = 1; i <= 3; ++i) {
    const std::size_t k = std::size_t{1} << i;
    const Tensor pooled = scb::pool_and_refine(f, i, conv);
    if (pooled.extent(1) != (11 + k - 1) / k || pooled.extent(2) != (13 + k - 1) / k) return false;
  }
  return true;
}

bool check_loss_gradient() {
  Rng rng(6);
  Tensor pred = random_tensor({8, 8}, rng, 0.05, 0.95);
  Tensor gt({8, 8});
  for (auto& v : gt.data()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const Tensor grad = losses::loss_gradient(pred, gt);
  constexpr double step = 1e-6;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Tensor up = pred, down = pred;
    up[i] += step;
    down[i] -= step;
    const double fd = (losses::combined_loss(up, gt) - losses::combined_loss(down, gt)) / (2 * step);
    if (std::abs(fd - grad[i]) > 1e-4 * std::max(std::abs(fd), std::abs(grad[i]))) return false;
  }
  return true;
}

bool check_dice_iou_identity() {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    metrics::ConfusionCounts c{rng.below(100), rng.below(100), rng.below(100), rng.below(100)};
    const double dice = metrics::dice_from_counts(c), iou = metrics::iou_from_counts(c);
    if (std::abs(dice - 2 * iou / (1 + iou)) > 1e-12) return false;
  }
  return true;
}

model::VideoClip synthetic_clip(std::uint64_t seed) {
  const auto video = gen_synthetic(SyntheticSpec{}, seed);
  return model::clip_sample(video.frames, 4, 3, video.masks);
}

bool check_forward_determinism() {
  model::ModelConfig cfg;
  cfg.backbone = model::BackboneConfig::for_stride(8, 16, 11);
  cfg.proj_dim = 16;
  const auto weights = model::ModelWeights::init(cfg);
  const auto clip = synthetic_clip(8);
  const auto a = model::astr_forward(clip, weights);
  const auto b = model::astr_forward(clip, weights);
  return a.prob_mask == b.prob_mask && a.prob_mask.extent(0) == 64 && a.coarse_masks.size() == 2;
}

bool check_fallback() {
  model::ModelConfig cfg;
  cfg.backbone = model::BackboneConfig::for_stride(8, 16, 12);
  cfg.proj_dim = 16;
  auto weights = model::ModelWeights::init(cfg);
  weights.coarse_decoder.bias.assign(1, -1e3);
  const auto out = model::astr_forward(synthetic_clip(9), weights);
  for (auto n : out.token_counts)
    if (n != 1) return false;
  return out.prob_mask.all_finite();
}

}  // namespace

bool run_selfcheck(std::ostream& out) {
  const std::vector<std::pair<std::string, std::function<bool()>>> checks = {
      {"matmul associativity", check_matmul_associativity},
      {"softmax rows stochastic", check_softmax},
      {"scan conversion round trip", check_asma_roundtrip},
      {"attention rows stochastic", check_attention_rows},
      {"fusion MAC count", check_mac_count},
      {"pooling schedule", check_pool_schedule},
      {"loss gradient vs finite differences", check_loss_gradient},
      {"dice/iou identity", check_dice_iou_identity},
      {"forward determinism", check_forward_determinism},
      {"empty coarse mask fallback", check_fallback},
  };
  bool all = true;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    try {
      ok = check();
    } catch (const std::exception& e) {
      out << "error " << name << ": " << e.what() << '\n';
    }
    out << (ok ? "pass " : "FAIL ") << name << '\n';
    all = all && ok;
  }
  return all;
}

}  // namespace astr::harness
