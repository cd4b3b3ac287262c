#include "astr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <vector>

#include "astr/context_transformer.hpp"
#include "astr/error.hpp"
#include "astr/random.hpp"

namespace astr::harness {

namespace {

Tensor random_tokens(std::size_t n, std::size_t c, Rng& rng) {
  Tensor t({n, c});
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

double median_ms(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

FusionBenchRow bench_fusion(std::size_t h, std::size_t w, std::size_t c, std::size_t t, std::size_t m,
                            std::size_t reps, std::uint64_t seed) {
  if (reps < 1) throw ParameterError("bench_fusion: reps must be >= 1");
  FusionBenchRow row;
  row.cost = scb::fusion_cost(h, w, c, t, m);

  Rng rng(seed);
  const auto weights = context::AttentionWeights::init(c, c, rng);
  const Tensor p = random_tokens(h * w, c, rng);
  const Tensor dense = random_tokens(h * w * t, c, rng);
  const Tensor sparse = random_tokens(m, c, rng);

  context::FusionMacs dense_macs, sparse_macs;
  context::cross_attention_fuse(p, dense, weights, nullptr, &dense_macs);
  context::cross_attention_fuse(p, sparse, weights, nullptr, &sparse_macs);
  row.measured_dense_macs = dense_macs.logit.macs;
  row.measured_sparse_macs = sparse_macs.logit.macs;

  using clock = std::chrono::steady_clock;
  std::vector<double> dense_ms, sparse_ms;
  for (std::size_t i = 0; i < reps; ++i) {
    auto start = clock::now();
    context::cross_attention_fuse(p, dense, weights);
    dense_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - start).count());
    start = clock::now();
    context::cross_attention_fuse(p, sparse, weights);
    sparse_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - start).count());
  }
  row.dense_ms = median_ms(std::move(dense_ms));
  row.sparse_ms = median_ms(std::move(sparse_ms));
  return row;
}

std::string fusion_csv_header() { return "h,w,c,t,m,dense_macs,sparse_macs,dense_ms,sparse_ms"; }

std::string fusion_csv_row(const FusionBenchRow& row) {
  std::ostringstream out;
  const auto& c = row.cost;
  out << c.h << ',' << c.w << ',' << c.c << ',' << c.t << ',' << c.m << ',' << c.dense_macs << ','
      << c.sparse_macs << ',' << row.dense_ms << ',' << row.sparse_ms;
  return out.str();
}

}  // namespace astr::harness
