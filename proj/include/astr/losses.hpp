#pragma once

#include <cstddef>
#include <span>

#include "astr/sparse_context.hpp"
#include "astr/tensor.hpp"

// Pixel supervision: BCE + soft Dice + MAE, with an auxiliary term on the
// coarse reference masks.
namespace astr::losses {

constexpr double kBceClamp = 1e-7;
constexpr double kDiceSmoothing = 1.0;
constexpr double kDefaultLambdaAux = 0.3;

enum class AuxReduction { mean, sum };

struct LossReport {
  double bce = 0.0;
  double dice = 0.0;
  double mae = 0.0;
  double seg = 0.0;
  double aux = 0.0;
  double total = 0.0;
  double lambda_aux = kDefaultLambdaAux;
};

double bce_loss(const Tensor& pred, const Tensor& gt);
double dice_loss(const Tensor& pred, const Tensor& gt);
double mae_loss(const Tensor& pred, const Tensor& gt);

/// bce + dice + mae.
double combined_loss(const Tensor& pred, const Tensor& gt);

/// Ground truth reduced to a coarse grid: average-pool, then >= 0.5 → 1.
Tensor downsample_mask(const Tensor& gt, std::size_t height, std::size_t width);

LossReport total_loss(const Tensor& pred, const Tensor& gt, std::span<const Tensor> coarse_masks,
                      std::span<const Tensor> coarse_gts, double lambda_aux = kDefaultLambdaAux,
                      AuxReduction reduction = AuxReduction::mean);

/// ∂(bce + dice + mae)/∂pred, same shape as pred.
Tensor loss_gradient(const Tensor& pred, const Tensor& gt);

}  // namespace astr::losses
