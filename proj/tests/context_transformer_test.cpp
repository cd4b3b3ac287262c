#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "astr/context_transformer.hpp"
#include "astr/error.hpp"
#include "oracles.hpp"

namespace astr::context {
namespace {

using oracle::random_tensor;

struct Fixture {
  std::size_t c, d;
  AttentionWeights w;
  Fixture(std::size_t channels, std::size_t proj, std::uint64_t seed) : c(channels), d(proj) {
    Rng rng(seed);
    w = AttentionWeights::init(c, d, rng);
  }
};

void expect_rows_stochastic(const Tensor& a, double tol) {
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < a.extent(1); ++j) {
      ASSERT_GE(a.at(i, j), 0.0);
      sum += a.at(i, j);
    }
    ASSERT_NEAR(sum, 1.0, tol) << "row " << i;
  }
}

TEST(AttentionWeights, InitShapesAndBounds) {
  const Fixture f(6, 4, 1);
  EXPECT_NO_THROW(f.w.validate());
  EXPECT_EQ(f.w.channels(), 6u);
  EXPECT_EQ(f.w.proj_dim(), 4u);
  EXPECT_EQ(f.w.mlp_in.shape(), (Shape{6, 24}));
  const double bound = 1.0 / std::sqrt(6.0);
  for (double v : f.w.wq.data()) EXPECT_LE(std::abs(v), bound);
  for (double v : f.w.mlp_out_bias) EXPECT_EQ(v, 0.0);
}

TEST(AttentionWeights, MismatchedMatricesAreDimensionErrors) {
  Fixture f(4, 3, 2);
  f.w.wo = Tensor({4, 4});
  EXPECT_THROW(f.w.validate(), DimensionError);
  Fixture g(4, 3, 2);
  g.w.mlp_in_bias.pop_back();
  EXPECT_THROW(g.w.validate(), DimensionError);
}

TEST(SelfAttention, SingleTokenAttendsToItself) {
  Rng rng(3);
  const Fixture f(5, 5, 4);
  AttentionTrace trace;
  const Tensor x = random_tensor({1, 5}, rng);
  const Tensor y = self_attention_layer(x, f.w, &trace);
  EXPECT_EQ(y.shape(), (Shape{1, 5}));
  EXPECT_EQ(trace.attention.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(trace.attention.at(0, 0), 1.0);
}

TEST(SelfAttention, IdenticalTokensGiveUniformWeights) {
  Rng rng(5);
  const Fixture f(4, 4, 6);
  const Tensor row = random_tensor({1, 4}, rng);
  Tensor x({7, 4});
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) x.at(i, j) = row.at(0, j);
  AttentionTrace trace;
  self_attention_layer(x, f.w, &trace);
  for (double v : trace.attention.data()) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
}

TEST(SelfAttention, MatchesScalarOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Fixture f(6, 3, 100 + trial);
    const Tensor x = random_tensor({9, 6}, rng, -2, 2);
    AttentionTrace trace;
    self_attention_layer(x, f.w, &trace);
    const auto a = oracle::attention(x, x, f.w.wq, f.w.wk);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) ASSERT_NEAR(trace.attention.at(i, j), static_cast<double>(a[i][j]), 1e-9);
  }
}

TEST(CrossAttention, MatchesScalarOracleIncludingValuePath) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Fixture f(5, 4, 200 + trial);
    const Tensor p = random_tensor({6, 5}, rng, -2, 2);
    const Tensor r = random_tensor({11, 5}, rng, -2, 2);
    AttentionTrace trace;
    const Tensor out = cross_attention_fuse(p, r, f.w, &trace);
    EXPECT_EQ(out.shape(), (Shape{6, 5}));
    const auto a = oracle::attention(p, r, f.w.wq, f.w.wk);
    const auto av = oracle::product(oracle::product(a, oracle::product(oracle::to_matrix(r), oracle::to_matrix(f.w.wv))),
                                    oracle::to_matrix(f.w.wo));
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 11; ++j) ASSERT_NEAR(trace.attention.at(i, j), static_cast<double>(a[i][j]), 1e-9);
      for (std::size_t j = 0; j < 5; ++j) ASSERT_NEAR(trace.attended.at(i, j), static_cast<double>(av[i][j]), 1e-9);
    }
  }
}

TEST(CrossAttention, ShapeContracts) {
  Rng rng(9);
  const Fixture f(4, 2, 10);
  EXPECT_THROW(cross_attention_fuse(random_tensor({3, 5}, rng), random_tensor({2, 4}, rng), f.w), DimensionError);
  EXPECT_THROW(cross_attention_fuse(random_tensor({3, 4}, rng), random_tensor({2, 3}, rng), f.w), DimensionError);
  EXPECT_THROW(cross_attention_fuse(random_tensor({3, 4}, rng), Tensor(), f.w), ContractError);
  AttentionTrace trace;
  cross_attention_fuse(random_tensor({3, 4}, rng), random_tensor({8, 4}, rng), f.w, &trace);
  EXPECT_EQ(trace.logits.shape(), (Shape{3, 8}));
}

TEST(CrossAttention, Deterministic) {
  Rng rng(11);
  const Fixture f(8, 8, 12);
  const Tensor p = random_tensor({10, 8}, rng), r = random_tensor({30, 8}, rng);
  EXPECT_EQ(cross_attention_fuse(p, r, f.w), cross_attention_fuse(p, r, f.w));
}

TEST(AttentionProperties, RowsSumToOneOverRandomInputs) {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 1 + rng.below(6), d = 1 + rng.below(6);
    const std::size_t n = 1 + rng.below(8), m = 1 + rng.below(12);
    Rng wrng(trial);
    const AttentionWeights w = AttentionWeights::init(c, d, wrng);
    AttentionTrace sa, ca;
    self_attention_layer(random_tensor({n, c}, rng, -3, 3), w, &sa);
    cross_attention_fuse(random_tensor({n, c}, rng, -3, 3), random_tensor({m, c}, rng, -3, 3), w, &ca);
    expect_rows_stochastic(sa.attention, 1e-12);
    expect_rows_stochastic(ca.attention, 1e-12);
  }
}

TEST(AttentionProperties, ContextOffsetAlongAllTokensLeavesWeightsUnchanged) {
  // Adding one vector u to every context token shifts row i of the logits by
  // the constant q_i·(Wkᵀu).
  Rng rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const Fixture f(4, 3, 300 + trial);
    const Tensor p = random_tensor({5, 4}, rng), r = random_tensor({7, 4}, rng);
    const Tensor u = random_tensor({1, 4}, rng);
    Tensor shifted = r;
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 4; ++j) shifted.at(i, j) += u.at(0, j);
    AttentionTrace a, b;
    cross_attention_fuse(p, r, f.w, &a);
    cross_attention_fuse(p, shifted, f.w, &b);
    for (std::size_t k = 0; k < a.attention.size(); ++k) ASSERT_NEAR(a.attention[k], b.attention[k], 1e-12);
  }
}

TEST(AttentionProperties, SelfAttentionIsPermutationEquivariant) {
  Rng rng(15);
  const Fixture f(6, 4, 16);
  const Tensor x = random_tensor({8, 6}, rng);
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[5]);
  Tensor px({8, 6});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) px.at(i, j) = x.at(perm[i], j);
  const Tensor y = self_attention_layer(x, f.w), py = self_attention_layer(px, f.w);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) ASSERT_NEAR(py.at(i, j), y.at(perm[i], j), 1e-12);
}

TEST(AttentionProperties, CrossAttentionIgnoresContextOrder) {
  Rng rng(17);
  const Fixture f(5, 5, 18);
  const Tensor p = random_tensor({4, 5}, rng), r = random_tensor({9, 5}, rng);
  Tensor rr({9, 5});
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 5; ++j) rr.at(i, j) = r.at(8 - i, j);
  const Tensor a = cross_attention_fuse(p, r, f.w), b = cross_attention_fuse(p, rr, f.w);
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-12);
}

TEST(AttentionProperties, LogitMacsAreLinearInContextLength) {
  Rng rng(19);
  const std::size_t n = 12, c = 8;
  const Fixture f(c, c, 20);
  const Tensor p = random_tensor({n, c}, rng);
  for (std::size_t m : {1u, 5u, 10u, 40u}) {
    FusionMacs macs;
    cross_attention_fuse(p, random_tensor({m, c}, rng), f.w, nullptr, &macs);
    EXPECT_EQ(macs.logit.macs, n * m * c);
    EXPECT_EQ(macs.value.macs, n * m * c);
  }
}

TEST(Tokens, FlattenRoundTripsAndOrdersRowMajor) {
  Rng rng(21);
  const Tensor f = random_tensor({3, 4, 5}, rng);
  const Tensor t = flatten_tokens(f);
  EXPECT_EQ(t.shape(), (Shape{20, 3}));
  EXPECT_EQ(t.at(2 * 5 + 3, 1), f.at(1, 2, 3));
  EXPECT_EQ(unflatten_tokens(t, 4, 5), f);
  EXPECT_THROW(unflatten_tokens(t, 3, 5), DimensionError);
  EXPECT_THROW(flatten_tokens(Tensor({3, 4})), DimensionError);
}

TEST(PositionEncoding, RowAndColumnHalves) {
  const Tensor pe = position_encoding(3, 4, 6);
  EXPECT_EQ(pe.shape(), (Shape{12, 6}));
  EXPECT_DOUBLE_EQ(pe.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(pe.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(pe.at(1 * 4 + 2, 0), std::sin(1.0));
  EXPECT_DOUBLE_EQ(pe.at(1 * 4 + 2, 3), std::sin(2.0));
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(pe.at(2 * 4 + x, j), pe.at(2 * 4, j));
}

TEST(RefinePerFrame, ShapeAndErrors) {
  Rng rng(22);
  Rng wrng(23);
  const std::vector<AttentionWeights> layers{AttentionWeights::init(4, 4, wrng), AttentionWeights::init(4, 4, wrng)};
  const Tensor out = refine_per_frame(random_tensor({4, 3, 3}, rng), layers);
  EXPECT_EQ(out.shape(), (Shape{9, 4}));
  EXPECT_TRUE(out.all_finite());
  EXPECT_THROW(refine_per_frame(random_tensor({4, 3, 3}, rng), std::vector<AttentionWeights>{}), ParameterError);
  EXPECT_THROW(refine_per_frame(random_tensor({5, 3, 3}, rng), layers), DimensionError);
}

TEST(RefinePerFrame, OutputRowsAreNormalized) {
  Rng rng(24), wrng(25);
  const std::vector<AttentionWeights> layers{AttentionWeights::init(8, 8, wrng)};
  const Tensor out = refine_per_frame(random_tensor({8, 4, 4}, rng), layers);
  for (std::size_t i = 0; i < out.extent(0); ++i) {
    double mean = 0;
    for (std::size_t j = 0; j < 8; ++j) mean += out.at(i, j);
    EXPECT_NEAR(mean / 8, 0.0, 1e-12);
  }
}

}  // namespace
}  // namespace astr::context
