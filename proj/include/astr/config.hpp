#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "astr/asma.hpp"
#include "astr/losses.hpp"
#include "astr/metrics.hpp"
#include "astr/model.hpp"

namespace astr::harness {

/// Run configuration. Text form is INI-like:
///
///   [section]
///   key = value   # comment
///
/// Every key belongs to a section; unknown or repeated keys are rejected.
struct Config {
  // [data]
  std::size_t width = 64;
  std::size_t height = 64;
  // [geometry]; the canvas is width×height
  asma::PolarGeometry geometry = asma::default_geometry(64, 64);
  // [model]
  std::size_t stride = 8;
  std::size_t channels = 32;
  std::size_t layers = 2;
  std::size_t proj_dim = 32;
  std::size_t frames = 3;
  // [scb]
  double threshold = scb::kDefaultThreshold;
  // [loss]
  double lambda_aux = losses::kDefaultLambdaAux;
  losses::AuxReduction aux_reduction = losses::AuxReduction::mean;
  // [metrics]
  metrics::MaeMode mae_mode = metrics::MaeMode::continuous;
  double bin_threshold = metrics::kDefaultThreshold;
  // [run]
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::string input;
  std::string output;

  /// Throws ParameterError naming the offending field.
  void validate() const;

  model::ModelConfig model_config() const;

  friend bool operator==(const Config&, const Config&) = default;
};

Config parse_config(std::string_view text);
std::string emit_config(const Config& cfg);
Config load_config(const std::filesystem::path& path);

/// Applies ASTR_SEED from the environment when set.
void apply_env_overrides(Config& cfg);

}  // namespace astr::harness
