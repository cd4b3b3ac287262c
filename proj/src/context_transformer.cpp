#include "astr/context_transformer.hpp"

#include <cmath>
#include <string>

#include "astr/error.hpp"

namespace astr::context {

using numerics::matmul;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void require_tokens(const TokenMatrix& t, std::size_t channels, const char* op, const char* what) {
  if (t.rank() != 2 || t.extent(1) != channels) {
    throw DimensionError(std::string(op) + ": " + what + " tokens " + shape_string(t.shape()) +
                         " do not have " + std::to_string(channels) + " channels");
  }
}

TokenMatrix mlp_sublayer(const TokenMatrix& x, const AttentionWeights& w) {
  Tensor hidden = matmul(x, w.mlp_in);
  numerics::add_row_bias(hidden, w.mlp_in_bias);
  Tensor out = matmul(numerics::relu(std::move(hidden)), w.mlp_out);
  numerics::add_row_bias(out, w.mlp_out_bias);
  return numerics::layer_norm_rows(numerics::add(x, out));
}

}  // namespace

void AttentionWeights::validate() const {
  const std::size_t c = wq.extent(0), d = wq.extent(1);
  auto expect = [](const Tensor& t, std::size_t r, std::size_t k, const char* name) {
    if (t.rank() != 2 || t.extent(0) != r || t.extent(1) != k) {
      throw DimensionError(std::string("attention weights: ") + name + " is " +
                           shape_string(t.shape()) + ", expected " + shape_string({r, k}));
    }
  };
  expect(wk, c, d, "wk");
  expect(wv, c, d, "wv");
  expect(wo, d, c, "wo");
  expect(mlp_in, c, 4 * c, "mlp_in");
  expect(mlp_out, 4 * c, c, "mlp_out");
  if (mlp_in_bias.size() != 4 * c || mlp_out_bias.size() != c) {
    throw DimensionError("attention weights: MLP bias lengths do not match channel count");
  }
}

AttentionWeights AttentionWeights::init(std::size_t channels, std::size_t proj_dim, Rng& rng) {
  if (channels == 0 || proj_dim == 0) throw ParameterError("attention weights need c >= 1 and d >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  AttentionWeights w;
  w.wq = random_matrix(channels, proj_dim, bound, rng);
  w.wk = random_matrix(channels, proj_dim, bound, rng);
  w.wv = random_matrix(channels, proj_dim, bound, rng);
  w.wo = random_matrix(proj_dim, channels, bound, rng);
  w.mlp_in = random_matrix(channels, 4 * channels, bound, rng);
  w.mlp_in_bias.assign(4 * channels, 0.0);
  w.mlp_out = random_matrix(4 * channels, channels, bound, rng);
  w.mlp_out_bias.assign(channels, 0.0);
  return w;
}

TokenMatrix attention_layer(const TokenMatrix& queries, const TokenMatrix& context,
                            const AttentionWeights& w, AttentionTrace* trace, FusionMacs* macs) {
  w.validate();
  const std::size_t c = w.channels();
  require_tokens(queries, c, "attention_layer", "query");
  require_tokens(context, c, "attention_layer", "context");

  const Tensor q = matmul(queries, w.wq);
  const Tensor k = matmul(context, w.wk);
  const Tensor v = matmul(context, w.wv);

  Tensor logits = numerics::matmul_transposed(q, k, macs ? &macs->logit : nullptr);
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.proj_dim()));
  for (auto& x : logits.data()) x *= scale;
  Tensor attention = numerics::softmax_rows(logits);
  Tensor attended = matmul(matmul(attention, v, macs ? &macs->value : nullptr), w.wo);

  TokenMatrix x = numerics::layer_norm_rows(numerics::add(queries, attended));
  if (trace) {
    trace->logits = std::move(logits);
    trace->attention = std::move(attention);
    trace->attended = std::move(attended);
  }
  return mlp_sublayer(x, w);
}

TokenMatrix self_attention_layer(const TokenMatrix& tokens, const AttentionWeights& w,
                                 AttentionTrace* trace) {
  return attention_layer(tokens, tokens, w, trace);
}

TokenMatrix cross_attention_fuse(const TokenMatrix& p, const TokenMatrix& r,
                                 const AttentionWeights& w, AttentionTrace* trace,
                                 FusionMacs* macs) {
  if (r.empty()) {
    throw ContractError("cross_attention_fuse: reference context is empty; apply the sparse-sample fallback first");
  }
  return attention_layer(p, r, w, trace, macs);
}

TokenMatrix flatten_tokens(const FeatureMap& f) {
  if (f.rank() != 3) throw DimensionError("flatten_tokens: expected c x h x w, got " + shape_string(f.shape()));
  const std::size_t c = f.extent(0), h = f.extent(1), w = f.extent(2);
  TokenMatrix t({h * w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) t.at(y * w + x, ch) = f.at(ch, y, x);
  return t;
}

FeatureMap unflatten_tokens(const TokenMatrix& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.extent(0) != height * width) {
    throw DimensionError("unflatten_tokens: " + shape_string(tokens.shape()) + " cannot fill a " +
                         std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  const std::size_t c = tokens.extent(1);
  FeatureMap f({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) f.at(ch, y, x) = tokens.at(y * width + x, ch);
  return f;
}

Tensor position_encoding(std::size_t height, std::size_t width, std::size_t channels) {
  Tensor pe({height * width, channels});
  const std::size_t row_channels = channels / 2;
  const std::size_t col_channels = channels - row_channels;
  auto encode = [](double pos, std::size_t j, std::size_t count) {
    const double expo = 2.0 * static_cast<double>(j / 2) / static_cast<double>(count);
    const double angle = pos / std::pow(10000.0, expo);
    return (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
  };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t n = y * width + x;
      for (std::size_t j = 0; j < row_channels; ++j)
        pe.at(n, j) = encode(static_cast<double>(y), j, row_channels);
      for (std::size_t j = 0; j < col_channels; ++j)
        pe.at(n, row_channels + j) = encode(static_cast<double>(x), j, col_channels);
    }
  }
  return pe;
}

TokenMatrix refine_per_frame(const FeatureMap& f, std::span<const AttentionWeights> layers,
                             bool add_position_encoding) {
  if (layers.empty()) throw ParameterError("refine_per_frame: needs at least one layer");
  TokenMatrix tokens = flatten_tokens(f);
  if (add_position_encoding) {
    tokens = numerics::add(tokens, position_encoding(f.extent(1), f.extent(2), f.extent(0)));
  }
  for (const auto& layer : layers) tokens = self_attention_layer(tokens, layer);
  return tokens;
}

}  // namespace astr::context
