#pragma once

#include <filesystem>

#include "astr/io.hpp"
#include "astr/model.hpp"

namespace astr::model {

/// Flattens every tensor under a stable dotted name ("sa.0.wq", "head.bias", …).
io::WeightRecords to_records(const ModelWeights& weights);

/// Inverse of to_records; shapes are checked against `cfg`.
ModelWeights from_records(const ModelConfig& cfg, const io::WeightRecords& records);

void save_model(const std::filesystem::path& path, const ModelWeights& weights);
ModelWeights load_model(const std::filesystem::path& path, const ModelConfig& cfg);

}  // namespace astr::model
