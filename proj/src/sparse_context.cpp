#include "astr/sparse_context.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "astr/error.hpp"
#include "astr/numerics.hpp"

namespace astr::scb {

std::size_t pooling_window(std::size_t offset) {
  if (offset < 1 || offset > 30) {
    throw ParameterError("reference frame offset must be in [1, 30], got " + std::to_string(offset));
  }
  return std::size_t{1} << offset;
}

FeatureMap pool_and_refine(const FeatureMap& f, std::size_t offset, const ConvLayer& refine) {
  const std::size_t k = pooling_window(offset);
  if (f.rank() != 3) throw DimensionError("pool_and_refine: expected c x h x w, got " + shape_string(f.shape()));
  const std::size_t min_side = std::min(f.extent(1), f.extent(2));
  if (k >= 2 * min_side) {
    throw ParameterError("pool_and_refine: window " + std::to_string(k) + " degenerates a " +
                         std::to_string(f.extent(1)) + "x" + std::to_string(f.extent(2)) + " grid");
  }
  const Tensor pooled = numerics::avg_pool2d(f, static_cast<long>(k));
  return numerics::conv2d(pooled, refine.kernel, 1, refine.bias);
}

CoarseMask coarse_decode(const FeatureMap& f, const ConvLayer& decoder) {
  if (decoder.kernel.rank() != 4 || decoder.kernel.extent(0) != 1 || decoder.kernel.extent(2) != 1) {
    throw DimensionError("coarse_decode: decoder must be a 1 x c x 1 x 1 kernel, got " +
                         shape_string(decoder.kernel.shape()));
  }
  Tensor logits = numerics::conv2d(f, decoder.kernel, 0, decoder.bias);
  const std::size_t h = logits.extent(1), w = logits.extent(2);
  return CoarseMask{numerics::sigmoid(std::move(logits)).reshaped({h, w})};
}

SparseContext sparse_sample(const FeatureMap& f, const CoarseMask& mask, double threshold,
                            std::size_t frame_offset) {
  if (f.rank() != 3 || mask.values.rank() != 2 || mask.height() != f.extent(1) ||
      mask.width() != f.extent(2)) {
    throw DimensionError("sparse_sample: mask " + shape_string(mask.values.shape()) +
                         " does not match feature grid " + shape_string(f.shape()));
  }
  const std::size_t c = f.extent(0), h = f.extent(1), w = f.extent(2);
  SparseContext out;
  out.frame_offset = frame_offset;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask.values.at(y, x) > threshold) out.positions.push_back({y, x});

  if (out.positions.empty()) {
    const auto data = mask.values.data();
    const auto best = std::max_element(data.begin(), data.end());  // first maximum wins
    const auto idx = static_cast<std::size_t>(best - data.begin());
    out.positions.push_back({idx / w, idx % w});
  }

  out.values = Tensor({out.positions.size(), c});
  for (std::size_t n = 0; n < out.positions.size(); ++n)
    for (std::size_t ch = 0; ch < c; ++ch)
      out.values.at(n, ch) = f.at(ch, out.positions[n].row, out.positions[n].col);
  return out;
}

TokenMatrix build_reference_context(std::span<const SparseContext> parts) {
  if (parts.empty()) throw ParameterError("build_reference_context: no reference parts");
  const std::size_t c = parts.front().values.extent(1);
  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return parts[a].frame_offset < parts[b].frame_offset;
  });

  std::size_t m = 0;
  for (const auto& part : parts) {
    if (part.values.rank() != 2 || part.values.extent(1) != c) {
      throw DimensionError("build_reference_context: part " + shape_string(part.values.shape()) +
                           " does not have " + std::to_string(c) + " channels");
    }
    m += part.values.extent(0);
  }
  std::vector<double> rows;
  rows.reserve(m * c);
  for (std::size_t i : order) {
    const auto v = parts[i].values.data();
    rows.insert(rows.end(), v.begin(), v.end());
  }
  return TokenMatrix({m, c}, std::move(rows));
}

FusionCost fusion_cost(std::size_t h, std::size_t w, std::size_t c, std::size_t t, std::size_t m) {
  if (h < 1 || w < 1 || c < 1 || t < 1 || m < 1) {
    throw ParameterError("fusion_cost: all arguments must be >= 1");
  }
  const std::uint64_t hw = static_cast<std::uint64_t>(h) * w;
  const std::uint64_t max_m = hw * (t - 1);
  if (m > max_m) {
    throw ParameterError("fusion_cost: m=" + std::to_string(m) + " exceeds h*w*(t-1)=" +
                         std::to_string(max_m));
  }
  FusionCost cost;
  cost.h = h;
  cost.w = w;
  cost.c = c;
  cost.t = t;
  cost.m = m;
  cost.dense_macs = hw * hw * t * c;
  cost.sparse_macs = hw * m * c;
  return cost;
}

}  // namespace astr::scb
