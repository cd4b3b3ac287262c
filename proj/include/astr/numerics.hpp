#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "astr/tensor.hpp"

// Deterministic dense kernels. Every reduction accumulates in ascending index
// order so results are bitwise reproducible.
namespace astr::numerics {

/// Multiply-accumulate tally for instrumented kernels.
struct MacCounter {
  std::uint64_t macs = 0;
};

Tensor matmul(const Tensor& a, const Tensor& b, MacCounter* counter = nullptr);

/// a · bᵀ for a[m×k], b[n×k].
Tensor matmul_transposed(const Tensor& a, const Tensor& b, MacCounter* counter = nullptr);

Tensor transpose(const Tensor& a);

Tensor softmax_rows(const Tensor& x);

/// Cross-correlation with zero fill. `kernel` is c_out×c_in×k×k, k ∈ {1, 3};
/// padding must keep the spatial size (k=3 → 1, k=1 → 0). `bias` is empty or c_out long.
Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t padding,
              std::span<const double> bias = {});

/// Mean over K×K windows; ragged edge windows average only in-bounds cells.
Tensor avg_pool2d(const Tensor& x, long window);

/// Bilinear read of a 2-D grid; anything outside [0,h-1]×[0,w-1] yields `fill`.
double bilinear_sample(const Tensor& img, double y, double x, double fill);

/// Half-pixel-centred (align_corners=false) bilinear up-sampling of c×h×w.
Tensor upsample_bilinear(const Tensor& x, long factor);

// Elementwise helpers used by the network layers.
Tensor add(const Tensor& a, const Tensor& b);
Tensor relu(Tensor x);
double sigmoid(double v);
Tensor sigmoid(Tensor x);
void add_row_bias(Tensor& x, std::span<const double> bias);

/// Per-row normalisation to zero mean and unit variance (no affine part).
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);

/// Throws NumericError naming `op` if any value is NaN or Inf.
void require_finite(const Tensor& t, const char* op);

}  // namespace astr::numerics
