#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "astr/model.hpp"
#include "astr/tensor.hpp"

// Pixel-level evaluation: MAE, IoU, Dice, sensitivity, specificity, FPS.
namespace astr::metrics {

constexpr double kDefaultThreshold = 0.5;

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Rates in [0,1]. fps is 0 until a throughput measurement fills it in.
struct MetricReport {
  double mae = 0.0;
  double iou = 0.0;
  double dice = 0.0;
  double sen = 0.0;
  double spe = 0.0;
  double fps = 0.0;
  ConfusionCounts counts;
};

enum class MaeMode { continuous, binary };

/// Prediction positive when >= threshold; ground truth positive when > 0.5.
ConfusionCounts confusion_counts(const Tensor& pred_prob, const Tensor& gt,
                                 double threshold = kDefaultThreshold);

// Ratio helpers; a zero denominator yields 1.0 (all its terms are zero then).
double dice_from_counts(const ConfusionCounts& c);
double iou_from_counts(const ConfusionCounts& c);
double sensitivity_from_counts(const ConfusionCounts& c);
double specificity_from_counts(const ConfusionCounts& c);

MetricReport frame_metrics(const Tensor& pred_prob, const Tensor& gt,
                           MaeMode mae_mode = MaeMode::continuous,
                           double threshold = kDefaultThreshold);

/// Unweighted per-frame mean of each rate; counts are summed.
MetricReport dataset_metrics(std::span<const MetricReport> per_frame);

struct FpsMeasurement {
  double fps = 0.0;
  double median_seconds = 0.0;
  std::size_t frames_per_rep = 0;
  std::size_t reps = 0;
  std::size_t threads = 1;  // timing runs on the calling thread only
};

using ClipProcessor = std::function<void(const model::VideoClip&)>;

/// `warmup` untimed passes over `clips`, then `reps` timed passes; fps is the
/// number of clips (one predicted frame each) over the median pass time.
FpsMeasurement measure_fps(const ClipProcessor& forward, std::span<const model::VideoClip> clips,
                           std::size_t warmup, std::size_t reps);

}  // namespace astr::metrics
