// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "astr/asma.hpp"
#include "astr/bench.hpp"
#include "astr/config.hpp"
#include "astr/context_transformer.hpp"
#include "astr/losses.hpp"
#include "astr/metrics.hpp"
#include "astr/model.hpp"
#include "astr/numerics.hpp"
#include "astr/sparse_context.hpp"
#include "astr/synthetic.hpp"
#include "oracles.hpp"

namespace {

using namespace astr;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %s  %s  (%s; %.2fs)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), seconds_since(start));
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

Outcome ac1_asma_roundtrip() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Image img = harness::band_limited_phantom(256, 256, seed);
    worst = std::max(worst, asma::roundtrip_error(img, asma::oversampled(asma::default_geometry(256, 256), 2.0)));
  }
  const Image big = harness::band_limited_phantom(512, 512, 99);
  const auto geom = asma::default_geometry(512, 512);
  auto t0 = Clock::now();
  const Image rect = asma::convex_to_linear(big, geom);
  const double forward_s = seconds_since(t0);
  t0 = Clock::now();
  asma::linear_to_convex(rect, geom);
  const double inverse_s = seconds_since(t0);
  const bool pass = worst <= 2.0 / 255.0 && forward_s < 1.0 && inverse_s < 1.0;
  return {pass, fmt("worst MAE %.3f gray levels", worst * 255) + fmt(", 512px convex->linear %.3fs", forward_s) +
                    fmt(", linear->convex %.3fs", inverse_s)};
}

Outcome ac2_attention_stochastic() {
  Rng rng(2024);
  double worst_sum = 0, worst_shift = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 1 + rng.below(8), d = 1 + rng.below(8), n = 1 + rng.below(10), m = 1 + rng.below(16);
    Rng wrng(trial);
    const auto w = context::AttentionWeights::init(c, d, wrng);
    context::AttentionTrace sa, ca;
    context::self_attention_layer(oracle::random_tensor({n, c}, rng, -3, 3), w, &sa);
    context::cross_attention_fuse(oracle::random_tensor({n, c}, rng, -3, 3), oracle::random_tensor({m, c}, rng, -3, 3), w,
                                  &ca);
    for (const auto* t : {&sa, &ca}) {
      Tensor shifted = t->logits;
      for (std::size_t i = 0; i < shifted.extent(0); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < shifted.extent(1); ++j) sum += t->attention.at(i, j);
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        const double offset = rng.uniform(-50, 50);
        for (std::size_t j = 0; j < shifted.extent(1); ++j) shifted.at(i, j) += offset;
      }
      const Tensor again = numerics::softmax_rows(shifted);
      for (std::size_t k = 0; k < again.size(); ++k) worst_shift = std::max(worst_shift, std::abs(again[k] - t->attention[k]));
    }
  }
  return {worst_sum <= 1e-12 && worst_shift <= 1e-12,
          fmt("max |row sum - 1| %.2e", worst_sum) + fmt(", max shift deviation %.2e", worst_shift)};
}

Outcome ac3_complexity() {
  std::size_t tuples = 0;
  bool macs_ok = true;
  Rng rng(3);
  for (std::size_t h : {2u, 5u, 11u})
    for (std::size_t w : {3u, 11u})
      for (std::size_t c : {4u, 32u})
        for (std::size_t m : {1u, 6u, 30u}) {
          Rng wrng(tuples);
          const auto weights = context::AttentionWeights::init(c, c, wrng);
          context::FusionMacs macs;
          context::cross_attention_fuse(oracle::random_tensor({h * w, c}, rng), oracle::random_tensor({m, c}, rng), weights,
                                        nullptr, &macs);
          macs_ok = macs_ok && macs.logit.macs == static_cast<std::uint64_t>(h) * w * m * c &&
                    macs.logit.macs == scb::fusion_cost(h, w, c, 1 + (m + h * w - 1) / (h * w), m).sparse_macs;
          ++tuples;
        }
  const auto cost = scb::fusion_cost(11, 11, 32, 3, 30);
  const bool formula_ok = cost.dense_macs == 1405536 && cost.sparse_macs == 116160;
  const std::size_t m = 51;  // floor(0.1 * 16 * 16 * 2)
  const auto row = harness::bench_fusion(16, 16, 32, 3, m, 100, 7);
  const bool timing_ok = row.sparse_ms < row.dense_ms && row.measured_sparse_macs == row.cost.sparse_macs &&
                         row.measured_dense_macs == row.cost.dense_macs;
  return {macs_ok && formula_ok && timing_ok,
          std::to_string(tuples) + " MAC tuples exact, 11x11x32 t=3 m=30: " + std::to_string(cost.dense_macs) + " vs " +
              std::to_string(cost.sparse_macs) + fmt(", 16x16 m=51 median dense %.3fms", row.dense_ms) +
              fmt(" sparse %.3fms", row.sparse_ms)};
}

Outcome ac4_pooling_schedule() {
  std::size_t checked = 0;
  bool ok = true;
  for (std::size_t h : {8u, 11u, 13u, 16u, 22u, 44u})
    for (std::size_t w : {8u, 11u, 15u, 32u})
      for (std::size_t i = 1; i <= 3; ++i) {
        const std::size_t k = std::size_t{1} << i;
        if (k >= 2 * std::min(h, w)) continue;
        scb::ConvLayer refine{Tensor({2, 2, 3, 3}, 0.01), {0.0, 0.0}};
        const Tensor out = scb::pool_and_refine(Tensor({2, h, w}, 1.0), i, refine);
        ok = ok && scb::pooling_window(i) == k && out.extent(1) == (h + k - 1) / k && out.extent(2) == (w + k - 1) / k;
        ++checked;
      }
  return {ok, std::to_string(checked) + " (h, w, i) cases with K = 2^i and ceil extents"};
}

Outcome ac5_loss_oracles() {
  Rng rng(5);
  double worst = 0, worst_affine = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 2 + rng.below(15), w = 2 + rng.below(15);
    const Tensor p = oracle::random_tensor({h, w}, rng, 0.0, 1.0);
    const Tensor g = oracle::random_binary({h, w}, rng, rng.uniform());
    worst = std::max({worst, std::abs(losses::bce_loss(p, g) - static_cast<double>(oracle::bce(p, g))),
                      std::abs(losses::dice_loss(p, g) - static_cast<double>(oracle::dice(p, g))),
                      std::abs(losses::mae_loss(p, g) - static_cast<double>(oracle::mae(p, g)))});
    const std::vector<Tensor> coarse{oracle::random_tensor({h, w}, rng, 0.0, 1.0)};
    const std::vector<Tensor> coarse_gt{losses::downsample_mask(g, h, w)};
    const double l1 = rng.uniform(0, 1), l2 = rng.uniform(0, 1);
    const auto a = losses::total_loss(p, g, coarse, coarse_gt, l1), b = losses::total_loss(p, g, coarse, coarse_gt, l2);
    const double scale = std::numeric_limits<double>::epsilon() * std::max(a.total, b.total);
    const bool exact_form = a.total == a.seg + l1 * a.aux && a.seg == b.seg && a.aux == b.aux;
    worst_affine = std::max(worst_affine, exact_form ? std::abs((b.total - a.total) - (l2 - l1) * a.aux) / scale
                                                     : std::numeric_limits<double>::infinity());
  }
  const bool default_ok = losses::kDefaultLambdaAux == 0.3 && losses::LossReport{}.lambda_aux == 0.3;
  return {worst <= 1e-6 && worst_affine <= 4.0 && default_ok,
          fmt("max oracle deviation %.2e", worst) + fmt(", affine residual %.1f ulp", worst_affine) +
              ", default lambda_aux 0.3"};
}

Outcome ac6_gradient_check() {
  Rng rng(6);
  const double step = 1e-6;
  double worst = 0;
  std::size_t pixels = 0;
  while (pixels < 1000) {
    Tensor p = oracle::random_tensor({8, 8}, rng, 0.05, 0.95);
    const Tensor g = oracle::random_binary({8, 8}, rng);
    const Tensor grad = losses::loss_gradient(p, g);
    for (std::size_t k = 0; k < p.size() && pixels < 1000; ++k, ++pixels) {
      const double keep = p[k];
      p[k] = keep + step;
      const double up = losses::combined_loss(p, g);
      p[k] = keep - step;
      const double down = losses::combined_loss(p, g);
      p[k] = keep;
      const double fd = (up - down) / (2 * step);
      worst = std::max(worst, std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1e-300}));
    }
  }
  return {worst <= 1e-4, std::to_string(pixels) + fmt(" pixels, max relative error %.2e", worst)};
}

Outcome ac7_metric_oracles() {
  Rng rng(7);
  bool exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 1 + rng.below(24), w = 1 + rng.below(24);
    const Tensor pred = oracle::random_binary({h, w}, rng, rng.uniform());
    const Tensor gt = oracle::random_binary({h, w}, rng, rng.uniform());
    const auto c = oracle::pixel_counts(pred, gt);
    const auto r = metrics::frame_metrics(pred, gt);
    auto ratio = [](std::uint64_t a, std::uint64_t b) { return b == 0 ? 1.0 : double(a) / double(b); };
    exact = exact && r.counts == metrics::ConfusionCounts{c.tp, c.fp, c.tn, c.fn} &&
            r.dice == ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn) && r.iou == ratio(c.tp, c.tp + c.fp + c.fn) &&
            r.sen == ratio(c.tp, c.tp + c.fn) && r.spe == ratio(c.tn, c.tn + c.fp);
  }
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const metrics::ConfusionCounts c{rng.below(5000), rng.below(5000), rng.below(5000), rng.below(5000)};
    const double iou = metrics::iou_from_counts(c);
    worst = std::max(worst, std::abs(metrics::dice_from_counts(c) - 2 * iou / (1 + iou)));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  return {exact && worst <= 4 * eps,
          std::string(exact ? "100 pairs exact" : "pixel-loop mismatch") + fmt(", identity residual %.1f ulp", worst / eps)};
}

Outcome ac8_end_to_end() {
  harness::Config cfg;
  cfg.seed = 8;
  const auto video = harness::gen_synthetic(harness::SyntheticSpec{}, cfg.seed);
  const auto clip = model::clip_sample(video.frames, 5, 3, video.masks);
  const auto a = model::astr_forward(clip, model::ModelWeights::init(cfg.model_config()));
  const auto b = model::astr_forward(clip, model::ModelWeights::init(cfg.model_config()));
  const bool small_ok = a.prob_mask.shape() == Shape{64, 64} && a.prob_mask == b.prob_mask && a.coarse_masks.size() == 2;

  cfg.width = cfg.height = 352;
  cfg.geometry = asma::default_geometry(352, 352);
  cfg.stride = 32;
  const std::vector<Image> big(3, harness::band_limited_phantom(352, 352, 1));
  const auto full = model::astr_forward(model::clip_sample(big, 2, 3), model::ModelWeights::init(cfg.model_config()));
  const bool big_ok = full.feature_height == 11 && full.feature_width == 11 && full.prob_mask.shape() == Shape{352, 352};
  return {small_ok && big_ok, std::string("64x64 T=3 ") + (a.prob_mask == b.prob_mask ? "bitwise identical" : "differs") +
                                  ", 352x352 stride 32 grid " + std::to_string(full.feature_height) + "x" +
                                  std::to_string(full.feature_width)};
}

Outcome ac9_fallback() {
  harness::Config cfg;
  model::ModelWeights weights = model::ModelWeights::init(cfg.model_config());
  for (double& v : weights.coarse_decoder.kernel.data()) v = 0.0;
  weights.coarse_decoder.bias.assign(1, -60.0);
  const auto video = harness::gen_synthetic(harness::SyntheticSpec{}, 9);
  const auto out = model::astr_forward(model::clip_sample(video.frames, 4, 3), weights);
  double max_coarse = 0;
  for (const auto& m : out.coarse_masks)
    for (double v : m.values.data()) max_coarse = std::max(max_coarse, v);
  bool in_range = out.prob_mask.all_finite();
  for (double v : out.prob_mask.data()) in_range = in_range && v >= 0.0 && v <= 1.0;
  const bool ok = out.token_counts == std::vector<std::size_t>{1, 1} && max_coarse <= 0.5 && in_range;
  return {ok, "token counts [" + std::to_string(out.token_counts.at(0)) + ", " + std::to_string(out.token_counts.at(1)) +
                  "], forward completed"};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  report("AC1", "ASMA round trip", ac1_asma_roundtrip);
  report("AC2", "attention stochasticity", ac2_attention_stochastic);
  report("AC3", "fusion complexity", ac3_complexity);
  report("AC4", "pooling schedule", ac4_pooling_schedule);
  report("AC5", "loss oracles", ac5_loss_oracles);
  report("AC6", "gradient check", ac6_gradient_check);
  report("AC7", "metric oracles", ac7_metric_oracles);
  report("AC8", "end-to-end determinism and shape", ac8_end_to_end);
  report("AC9", "sparse-context fallback", ac9_fallback);
  const double total = seconds_since(start);
  const bool fast = total < 60.0;
  if (!fast) ++failures;
  std::printf("AC3 %s  acceptance runtime under one minute  (%.2fs)\n", fast ? "PASS" : "FAIL", total);
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
