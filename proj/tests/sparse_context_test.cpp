#include <gtest/gtest.h>

#include <cmath>

#include "astr/error.hpp"
#include "astr/sparse_context.hpp"
#include "oracles.hpp"

namespace astr::scb {
namespace {

using oracle::random_tensor;

ConvLayer identity_refine(std::size_t c) {
  ConvLayer layer{Tensor({c, c, 3, 3}), std::vector<double>(c, 0.0)};
  for (std::size_t i = 0; i < c; ++i) layer.kernel.data()[((i * c + i) * 3 + 1) * 3 + 1] = 1.0;
  return layer;
}

CoarseMask mask_of(std::size_t h, std::size_t w, double fill) { return CoarseMask{Tensor({h, w}, fill)}; }

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

TEST(PoolingWindow, DoublesWithOffset) {
  EXPECT_EQ(pooling_window(1), 2u);
  EXPECT_EQ(pooling_window(2), 4u);
  EXPECT_EQ(pooling_window(3), 8u);
  EXPECT_THROW(pooling_window(0), ParameterError);
}

TEST(PoolAndRefine, ExtentsFollowSchedule) {
  Rng rng(1);
  for (std::size_t h : {9u, 11u, 16u, 23u})
    for (std::size_t w : {8u, 13u, 17u}) {
      const Tensor f = random_tensor({3, h, w}, rng);
      for (std::size_t i = 1; i <= 3; ++i) {
        if (pooling_window(i) >= 2 * std::min(h, w)) continue;
        const Tensor out = pool_and_refine(f, i, identity_refine(3));
        ASSERT_EQ(out.shape(), (Shape{3, ceil_div(h, std::size_t{1} << i), ceil_div(w, std::size_t{1} << i)}))
            << h << "x" << w << " i=" << i;
      }
    }
}

TEST(PoolAndRefine, ConstantMapWithIdentityConvStaysConstant) {
  const Tensor f({2, 8, 8}, 0.75);
  const Tensor out = pool_and_refine(f, 1, identity_refine(2));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.75);
}

TEST(PoolAndRefine, DegenerateWindowIsParameterError) {
  const Tensor f({2, 4, 6});
  EXPECT_NO_THROW(pool_and_refine(f, 2, identity_refine(2)));
  EXPECT_THROW(pool_and_refine(f, 3, identity_refine(2)), ParameterError);
  EXPECT_THROW(pool_and_refine(f, 0, identity_refine(2)), ParameterError);
}

TEST(CoarseDecode, ZeroWeightsGiveOneHalf) {
  Rng rng(2);
  const CoarseMask m = coarse_decode(random_tensor({4, 3, 5}, rng), ConvLayer{Tensor({1, 4, 1, 1}), {0.0}});
  EXPECT_EQ(m.height(), 3u);
  EXPECT_EQ(m.width(), 5u);
  for (double v : m.values.data()) EXPECT_EQ(v, 0.5);
}

TEST(CoarseDecode, LargeNegativeBiasSaturates) {
  Rng rng(3);
  const CoarseMask m = coarse_decode(random_tensor({4, 3, 3}, rng), ConvLayer{Tensor({1, 4, 1, 1}), {-50.0}});
  for (double v : m.values.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1e-20);
  }
}

TEST(CoarseDecode, HandSetTwoChannelCase) {
  const Tensor f({2, 2, 2}, std::vector<double>{1, -2, 0.5, 3, 0.25, 4, -1, 2});
  const ConvLayer dec{Tensor({1, 2, 1, 1}, std::vector<double>{0.7, -0.3}), {0.1}};
  const CoarseMask m = coarse_decode(f, dec);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) {
      const long double z = 0.7L * f.at(0, y, x) - 0.3L * f.at(1, y, x) + 0.1L;
      const long double expected = 1.0L / (1.0L + std::exp(-z));
      EXPECT_NEAR(m.values.at(y, x), static_cast<double>(expected), 1e-12);
    }
}

TEST(CoarseDecode, ChannelMismatchIsDimensionError) {
  EXPECT_THROW(coarse_decode(Tensor({3, 2, 2}), ConvLayer{Tensor({1, 2, 1, 1}), {0.0}}), DimensionError);
  EXPECT_THROW(coarse_decode(Tensor({2, 2, 2}), ConvLayer{Tensor({2, 2, 1, 1}), {0.0, 0.0}}), DimensionError);
}

TEST(SparseSample, AllOnesSelectsEveryCell) {
  Rng rng(4);
  const SparseContext s = sparse_sample(random_tensor({3, 4, 5}, rng), mask_of(4, 5, 1.0));
  EXPECT_EQ(s.token_count(), 20u);
  EXPECT_EQ(s.values.shape(), (Shape{20, 3}));
}

TEST(SparseSample, AllZerosFallsBackToOrigin) {
  Rng rng(5);
  const Tensor f = random_tensor({3, 4, 5}, rng);
  const SparseContext s = sparse_sample(f, mask_of(4, 5, 0.0), 0.5, 2);
  ASSERT_EQ(s.token_count(), 1u);
  EXPECT_EQ(s.positions[0], (GridPos{0, 0}));
  EXPECT_EQ(s.frame_offset, 2u);
  for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(s.values.at(0, ch), f.at(ch, 0, 0));
}

TEST(SparseSample, FallbackPicksFirstMaximum) {
  CoarseMask m = mask_of(3, 3, 0.1);
  m.values.at(1, 2) = 0.3;
  m.values.at(2, 0) = 0.3;
  const SparseContext s = sparse_sample(Tensor({1, 3, 3}), m);
  ASSERT_EQ(s.token_count(), 1u);
  EXPECT_EQ(s.positions[0], (GridPos{1, 2}));
}

TEST(SparseSample, FiveMarkedCells) {
  Rng rng(6);
  const Tensor f = random_tensor({4, 6, 6}, rng);
  CoarseMask m = mask_of(6, 6, 0.2);
  const std::vector<GridPos> marked{{0, 3}, {1, 1}, {2, 5}, {4, 0}, {5, 5}};
  for (const auto& p : marked) m.values.at(p.row, p.col) = 0.9;
  const SparseContext s = sparse_sample(f, m);
  ASSERT_EQ(s.positions, marked);
  for (std::size_t k = 0; k < marked.size(); ++k)
    for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(s.values.at(k, ch), f.at(ch, marked[k].row, marked[k].col));
}

TEST(SparseSample, GridMismatchIsDimensionError) {
  EXPECT_THROW(sparse_sample(Tensor({2, 3, 3}), mask_of(3, 4, 1.0)), DimensionError);
}

TEST(SparseSample, PropertiesOverRandomMasks) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 1 + rng.below(7), w = 1 + rng.below(7);
    const Tensor f = random_tensor({2, h, w}, rng);
    const CoarseMask m{random_tensor({h, w}, rng, 0.0, 1.0)};
    std::size_t previous = h * w + 1;
    for (double thr : {0.0, 0.2, 0.4, 0.5, 0.7, 0.9, 1.0}) {
      const SparseContext s = sparse_sample(f, m, thr);
      ASSERT_GE(s.token_count(), 1u);
      ASSERT_LE(s.token_count(), previous);
      previous = s.token_count();
      for (std::size_t k = 0; k < s.token_count(); ++k) {
        ASSERT_LT(s.positions[k].row, h);
        ASSERT_LT(s.positions[k].col, w);
        if (k > 0) {
          const auto a = s.positions[k - 1], b = s.positions[k];
          ASSERT_LT(a.row * w + a.col, b.row * w + b.col);
        }
        if (s.token_count() > 1) ASSERT_GT(m.values.at(s.positions[k].row, s.positions[k].col), thr);
      }
    }
  }
}

SparseContext part(std::size_t n, std::size_t c, std::size_t offset, double base) {
  SparseContext s;
  s.frame_offset = offset;
  s.values = Tensor({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    s.positions.push_back({0, i});
    for (std::size_t j = 0; j < c; ++j) s.values.at(i, j) = base + i;
  }
  return s;
}

TEST(BuildReferenceContext, SinglePartIsCopied) {
  const std::vector<SparseContext> parts{part(3, 2, 1, 10)};
  const Tensor r = build_reference_context(parts);
  EXPECT_EQ(r, parts[0].values);
}

TEST(BuildReferenceContext, OrdersByOffset) {
  const std::vector<SparseContext> parts{part(3, 2, 2, 200), part(2, 2, 1, 100)};
  const Tensor r = build_reference_context(parts);
  ASSERT_EQ(r.shape(), (Shape{5, 2}));
  EXPECT_EQ(r.at(0, 0), 100);
  EXPECT_EQ(r.at(1, 0), 101);
  EXPECT_EQ(r.at(2, 0), 200);
  EXPECT_EQ(r.at(4, 1), 202);
}

TEST(BuildReferenceContext, Errors) {
  EXPECT_THROW(build_reference_context(std::vector<SparseContext>{}), ParameterError);
  const std::vector<SparseContext> parts{part(1, 2, 1, 0), part(1, 3, 2, 0)};
  EXPECT_THROW(build_reference_context(parts), DimensionError);
}

TEST(FusionCost, ReferenceValues) {
  const FusionCost cost = fusion_cost(11, 11, 32, 3, 30);
  EXPECT_EQ(cost.dense_macs, 1405536u);
  EXPECT_EQ(cost.sparse_macs, 116160u);
  EXPECT_EQ(fusion_cost(5, 7, 3, 2, 1).sparse_macs, 5u * 7 * 3);
}

TEST(FusionCost, FullContextBoundary) {
  // m = hw(t-1) with the dense count taken over t-1 frames gives equal counts.
  const std::size_t h = 6, w = 4, c = 8, t = 3;
  const FusionCost full = fusion_cost(h, w, c, t, h * w * (t - 1));
  EXPECT_EQ(full.sparse_macs, fusion_cost(h, w, c, t - 1, 1).dense_macs);
  EXPECT_LT(full.sparse_macs, full.dense_macs);
}

TEST(FusionCost, RangeErrors) {
  EXPECT_THROW(fusion_cost(11, 11, 32, 3, 243), ParameterError);
  EXPECT_THROW(fusion_cost(11, 11, 32, 1, 1), ParameterError);
  EXPECT_THROW(fusion_cost(0, 11, 32, 3, 1), ParameterError);
  EXPECT_THROW(fusion_cost(11, 11, 32, 3, 0), ParameterError);
}

TEST(FusionCost, InstrumentedLogitStageMatchesFormula) {
  Rng rng(8);
  for (std::size_t h : {2u, 5u})
    for (std::size_t w : {3u, 4u})
      for (std::size_t c : {2u, 6u})
        for (std::size_t m : {1u, 7u, 12u}) {
          Rng wrng(h * 100 + w * 10 + c);
          const auto weights = context::AttentionWeights::init(c, c, wrng);
          context::FusionMacs macs;
          context::cross_attention_fuse(random_tensor({h * w, c}, rng), random_tensor({m, c}, rng), weights, nullptr,
                                        &macs);
          ASSERT_EQ(macs.logit.macs, fusion_cost(h, w, c, 3, m).sparse_macs);
        }
}

}  // namespace
}  // namespace astr::scb
