#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "astr/sparse_context.hpp"

namespace astr::harness {

struct FusionBenchRow {
  scb::FusionCost cost;
  std::uint64_t measured_dense_macs = 0;   // logit-stage counter, dense run
  std::uint64_t measured_sparse_macs = 0;  // logit-stage counter, sparse run
  double dense_ms = 0.0;                   // median over reps
  double sparse_ms = 0.0;
};

/// Times cross-attention fusion of h·w query tokens against a dense context of
/// h·w·t tokens and a sparse context of m tokens, c channels, d = c.
FusionBenchRow bench_fusion(std::size_t h, std::size_t w, std::size_t c, std::size_t t, std::size_t m,
                            std::size_t reps, std::uint64_t seed);

std::string fusion_csv_header();
std::string fusion_csv_row(const FusionBenchRow& row);

}  // namespace astr::harness
