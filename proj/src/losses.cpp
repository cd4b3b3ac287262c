#include "astr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "astr/error.hpp"
#include "astr/numerics.hpp"

namespace astr::losses {

namespace {

void require_same(const Tensor& pred, const Tensor& gt, const char* op) {
  if (pred.shape() != gt.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + shape_string(pred.shape()) +
                         " and ground truth " + shape_string(gt.shape()) + " differ");
  }
}

double clamp_prob(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

struct DiceSums {
  double inter = 0.0;
  double pred = 0.0;
  double gt = 0.0;
};

DiceSums dice_sums(const Tensor& pred, const Tensor& gt) {
  DiceSums s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s.inter += pred[i] * gt[i];
    s.pred += pred[i];
    s.gt += gt[i];
  }
  return s;
}

}  // namespace

double bce_loss(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "bce_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred[i]);
    sum -= gt[i] * std::log(p) + (1.0 - gt[i]) * std::log1p(-p);
  }
  return sum / static_cast<double>(pred.size());
}

double dice_loss(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "dice_loss");
  const DiceSums s = dice_sums(pred, gt);
  return 1.0 - (2.0 * s.inter + kDiceSmoothing) / (s.pred + s.gt + kDiceSmoothing);
}

double mae_loss(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "mae_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gt[i]);
  return sum / static_cast<double>(pred.size());
}

double combined_loss(const Tensor& pred, const Tensor& gt) {
  return bce_loss(pred, gt) + dice_loss(pred, gt) + mae_loss(pred, gt);
}

Tensor downsample_mask(const Tensor& gt, std::size_t height, std::size_t width) {
  if (gt.rank() != 2 || height == 0 || width == 0) {
    throw DimensionError("downsample_mask: expected an h x w mask and a positive target grid");
  }
  const std::size_t h = gt.extent(0), w = gt.extent(1);
  const std::size_t k = (h + height - 1) / height;
  if ((w + k - 1) / k != width || (h + k - 1) / k != height) {
    throw DimensionError("downsample_mask: no single pooling window maps " + shape_string(gt.shape()) +
                         " to " + shape_string({height, width}));
  }
  Tensor pooled = numerics::avg_pool2d(gt.reshaped({1, h, w}), static_cast<long>(k));
  for (auto& v : pooled.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return std::move(pooled).reshaped({height, width});
}

LossReport total_loss(const Tensor& pred, const Tensor& gt, std::span<const Tensor> coarse_masks,
                      std::span<const Tensor> coarse_gts, double lambda_aux, AuxReduction reduction) {
  if (coarse_masks.size() != coarse_gts.size()) {
    throw DimensionError("total_loss: " + std::to_string(coarse_masks.size()) + " coarse masks but " +
                         std::to_string(coarse_gts.size()) + " coarse ground truths");
  }
  LossReport r;
  r.lambda_aux = lambda_aux;
  r.bce = bce_loss(pred, gt);
  r.dice = dice_loss(pred, gt);
  r.mae = mae_loss(pred, gt);
  r.seg = r.bce + r.dice + r.mae;
  double aux = 0.0;
  for (std::size_t i = 0; i < coarse_masks.size(); ++i) aux += combined_loss(coarse_masks[i], coarse_gts[i]);
  if (reduction == AuxReduction::mean && !coarse_masks.empty()) aux /= static_cast<double>(coarse_masks.size());
  r.aux = aux;
  r.total = r.seg + lambda_aux * r.aux;
  return r;
}

Tensor loss_gradient(const Tensor& pred, const Tensor& gt) {
  require_same(pred, gt, "loss_gradient");
  const double n = static_cast<double>(pred.size());
  const DiceSums s = dice_sums(pred, gt);
  const double num = 2.0 * s.inter + kDiceSmoothing;
  const double den = s.pred + s.gt + kDiceSmoothing;

  Tensor grad(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], g = gt[i];
    double bce = 0.0;
    if (p > kBceClamp && p < 1.0 - kBceClamp) bce = (p - g) / (p * (1.0 - p) * n);
    const double dice = -(2.0 * g * den - num) / (den * den);
    const double diff = p - g;
    const double mae = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / n;
    grad[i] = bce + dice + mae;
  }
  return grad;
}

}  // namespace astr::losses
